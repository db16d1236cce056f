#pragma once

#include <stdexcept>
#include <string>

namespace goal {

// Invalid generator, training, sampler or service configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shape or size mismatch between tensors, matrices or instances.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A schedule handed to labeling did not pass the feasibility check.
class LabelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Timesteps given in the wrong order to the reverse posterior.
class OrderingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Broken internal invariant (e.g. a cycle in a schedule's precedence digraph).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed file or checkpoint.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace goal

#pragma once
// Layers, optimizer and checkpoint I/O on top of the tape.

#include <cstdint>
#include <string>
#include <vector>

#include "goal/rng.hpp"
#include "goal/tape.hpp"
#include "goal/tensor.hpp"
#include "json.hpp"

namespace goal {

// y = x W (+ b), W stored in x out. Weights and bias start at U(-1/sqrt(in), 1/sqrt(in)).
template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  static Linear create(ParamStore<T>& store, const std::string& name, int in, int out, bool with_bias, Rng& rng);
  Var operator()(Tape<T>& tape, Var x) const;
  int in_features() const { return weight->value.rows; }
  int out_features() const { return weight->value.cols; }
};

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Decoupled weight decay: w <- w - lr * (wd * w + mhat / (sqrt(vhat) + eps)).
template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& store, AdamWConfig cfg);
  void step();
  long steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  ParamStore<T>& store_;
  AdamWConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Rescales all gradients so their global l2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& store, double max_norm);

// [sin(t w_0), cos(t w_0), sin(t w_1), ...] with w_i = 10000^(-2i/d).
// Throws ConfigError for odd d.
std::vector<double> sinusoidal_embedding(double t, int d);

// Named 2-D tensors plus a JSON header, stored as
//   "GOALCKPT" | u32 version | u64 header bytes | header JSON | float64 LE values
// The header lists every tensor's name and shape in storage order.
struct CheckpointTensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json header;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace goal

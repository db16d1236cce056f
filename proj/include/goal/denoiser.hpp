#pragma once
// Conditional relational graph denoiser: predicts a logit for every ordered
// pair of operations from a noisy decision matrix, the timestep, the instance
// and the objective target.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "goal/graph.hpp"
#include "goal/instance.hpp"
#include "goal/nn.hpp"
#include "goal/tape.hpp"
#include "goal/tensor.hpp"
#include "json.hpp"

namespace goal {

struct DenoiserConfig {
  int hidden = 128;
  int embed_dim = 256;  // sinusoidal timestep embedding
  int cond_dim = 256;   // e_t, e_s, e_o
  int layers = 12;
  int relations = kNumEdgeTypes;
  int feature_length = kFeatureLength;
  std::uint64_t seed = 0;

  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

void check_denoiser_config(const DenoiserConfig& cfg);
void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

// Logit written on the diagonal, where no decision exists.
inline constexpr double kDiagonalLogit = -1e4;
// Node: in/out degree per relation, processing time, position in the job.
inline constexpr int kNodeInputs = 2 * kNumEdgeTypes + 2;
// Edge: noisy bit, relation membership, same job, earlier in the same job.
inline constexpr int kEdgeInputs = kNumEdgeTypes + 3;

// Objective input: u itself plus a sinusoidal lift of each component at
// kObjectiveScale so nearby targets stay separable.
inline constexpr int kObjectiveEmbed = 16;
inline constexpr double kObjectiveScale = 1000.0;
inline constexpr int kObjectiveInputs = 2 + 2 * kObjectiveEmbed;

// Off-diagonal pairs are stored row-major, skipping the diagonal.
inline int pair_index(int k, int a, int b) { return a * (k - 1) + (b < a ? b : b - 1); }

// Everything about an instance the denoiser needs, computed once.
struct InstanceContext {
  Instance instance;
  RelationalGraph graph;
  int k = 0;
  std::vector<double> node_inputs;                            // K x kNodeInputs
  std::vector<std::array<std::uint8_t, kEdgeInputs - 1>> indicators;  // per off-diagonal pair
  std::vector<double> features;                               // kFeatureLength
  std::array<std::vector<std::pair<int, int>>, kNumEdgeTypes> relation_edges;  // (receiver, sender)
};

std::shared_ptr<const InstanceContext> make_context(const Instance& inst);

struct DenoiserInput {
  const InstanceContext* context = nullptr;
  std::span<const std::uint8_t> x_t;  // K x K bits
  int t = 1;
  std::array<double, 2> u{};  // all zeros is the unconditional token
};

// Several samples flattened into node rows and edge rows.
struct GraphBatch {
  using Index = std::shared_ptr<const std::vector<int>>;

  int samples = 0;
  int nodes = 0;
  int edges = 0;
  std::vector<int> node_offset;
  std::vector<int> edge_offset;
  std::vector<int> sizes;

  Tensor<double> node_in;    // nodes x kNodeInputs
  Tensor<double> edge_in;    // edges x kEdgeInputs
  Tensor<double> time_in;    // samples x embed_dim
  Tensor<double> feature_in; // samples x feature_length
  Tensor<double> target_in;  // samples x kObjectiveInputs

  Index node_sample, edge_sample, edge_a, edge_b;
  std::array<Index, kNumEdgeTypes> rel_pair, rel_receiver, rel_sender;
};

GraphBatch make_batch(std::span<const DenoiserInput> inputs, const DenoiserConfig& cfg);

template <typename T>
class Denoiser {
 public:
  explicit Denoiser(const DenoiserConfig& cfg);

  const DenoiserConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  // Logits for every edge row of the batch (edges x 1). Training mode uses
  // batch statistics in every normalization layer and updates running stats.
  Var forward(Tape<T>& tape, const GraphBatch& batch, bool training);

  // Inference-mode dense K x K logits per input, diagonal = kDiagonalLogit.
  std::vector<std::vector<double>> predict(std::span<const DenoiserInput> inputs);

  Checkpoint to_checkpoint(const nlohmann::json& metadata = nlohmann::json::object()) const;
  // Throws FormatError when names or shapes disagree with the stored config.
  static Denoiser from_checkpoint(const Checkpoint& ckpt);

 private:
  struct Layer {
    Linear<T> u, w_m, w_t, w_s, w_o, mlp_e0, mlp_e1;
    std::array<Linear<T>, kNumEdgeTypes> v, p, q, r;
    BatchNorm<T>* bn_node = nullptr;
    std::array<BatchNorm<T>*, kNumEdgeTypes> bn_edge{};
  };

  DenoiserConfig cfg_;
  ParamStore<T> store_;
  Linear<T> time0_, time1_, inst0_, inst1_, inst2_, obj0_, obj1_;
  Linear<T> node_init_, edge_init_;
  std::vector<Layer> layers_;
  Linear<T> read0_, read1_;
  BatchNorm<T>* read_bn_ = nullptr;
};

// Dense K x K logits of sample s from the edge-row output of forward().
std::vector<double> dense_logits(const Tensor<float>& out, const GraphBatch& batch, int s);
std::vector<double> dense_logits(const Tensor<double>& out, const GraphBatch& batch, int s);

}  // namespace goal

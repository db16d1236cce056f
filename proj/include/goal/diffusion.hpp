#pragma once
// Bernoulli forward corruption, the reverse posterior, training with
// conditioning dropout, and the guided skip-step sampler.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "goal/denoiser.hpp"
#include "goal/oracle.hpp"
#include "goal/rng.hpp"
#include "goal/schedule.hpp"

namespace goal {

class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  // Linear beta from beta_1 to beta_T. The ramp is multiplied by 1000 / T so
  // that every horizon accumulates the same total noise as T = 1000.
  static NoiseSchedule linear(int timesteps, double beta_1 = 1e-4, double beta_T = 0.02);

  int timesteps() const { return t_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  double beta(int t) const { return beta_.at(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(t); }
  // Per-step flip probability beta_t / 2.
  double flip(int t) const { return beta(t) / 2.0; }
  // Flip probability between timesteps a < b: (1 - abar_b / abar_a) / 2.
  double flip_between(int a, int b) const;
  // P(x_t = 1 | x_0).
  double marginal_one(int t, int x0) const { return alpha_bar(t) * x0 + (1.0 - alpha_bar(t)) / 2.0; }

 private:
  int t_ = 0;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;       // index 0 unused (0)
  std::vector<double> alpha_bar_;  // alpha_bar_[0] = 1
};

// Independent flip of every off-diagonal entry with probability
// (1 - abar_t) / 2; the diagonal stays 0.
std::vector<std::uint8_t> q_sample(std::span<const std::uint8_t> x0, int k, int t, const NoiseSchedule& sched,
                                   Rng& rng);

// kernel(y | z; f) = f + (1 - 2f) [y == z]
inline double flip_kernel(int y, int z, double f) { return f + (1.0 - 2.0 * f) * (y == z ? 1.0 : 0.0); }

// P(x_a = 1 | x_b, x0_hat ~ Bern(p)) with step flip u = f(a, b) and v = f(0, a).
double posterior_from_flips(int x_b, double p, double u, double v);
// Throws OrderingError unless 0 <= a < b <= T.
double posterior(int x_b, double p, int a, int b, const NoiseSchedule& sched);

// uncond + gamma (cond - uncond); exactly cond when gamma == 1.
std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond, double gamma);

enum class TauSchedule { Linear, Cosine };
std::string_view to_string(TauSchedule s);
TauSchedule parse_tau_schedule(std::string_view text);

// Ascending timesteps tau_1 < ... < tau_M. Linear: evenly spaced from 1 to T.
// Cosine: floor((1 - cos(c_i pi / 2)) T) with c_i = i / M, clamped to [1, T]
// and de-duplicated, which is denser near t = 1. Throws ConfigError if M > T.
std::vector<int> tau_schedule(TauSchedule kind, int steps, int timesteps);

struct SamplerConfig {
  int steps = 20;
  TauSchedule schedule = TauSchedule::Linear;
  double guidance = 2.0;
  double threshold = 0.5;
};

void check_sampler_config(const SamplerConfig& cfg, int timesteps);

// A trained denoiser together with its noise schedule and the problem kinds
// it was trained on.
struct GoalModel {
  std::unique_ptr<Denoiser<float>> net;
  NoiseSchedule schedule;
  std::vector<ProblemKind> kinds;
  std::string id;
  nlohmann::json metadata = nlohmann::json::object();

  bool covers(ProblemKind kind) const;
};

void save_model(const GoalModel& model, const std::string& path);
GoalModel load_model(const std::string& path);

struct Candidate {
  DecisionMatrix x;
  Schedule schedule;
  ObjectiveVector objectives;
};

struct SampleResult {
  std::vector<Candidate> candidates;
  double seconds = 0.0;  // wall-clock of denoising and decoding
};

// Candidate c uses its own random stream derived from (seed, c), so a
// candidate's result does not depend on how many others are drawn.
SampleResult sample(GoalModel& model, const InstanceContext& ctx, const Target& u, const SamplerConfig& cfg,
                    int n_candidates, std::uint64_t seed);

struct TrainConfig {
  DenoiserConfig model;
  int timesteps = 1000;
  int epochs = 25;
  int batch = 64;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double p_drop = 0.1;
  double clip_norm = 1.0;
  // Cosine decay of the learning rate to lr * min_lr_ratio; 1 keeps it constant.
  double min_lr_ratio = 1.0;
  std::uint64_t seed = 0;

  // "paper" or "desk"; throws ConfigError otherwise.
  static TrainConfig profile(std::string_view name);
};

void check_train_config(const TrainConfig& cfg);

struct TrainProgress {
  int epoch = 0;
  long step = 0;
  long total_steps = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  std::vector<double> step_loss;
  double seconds = 0.0;
};

// Trains model.net in place on every sample of `data`.
TrainResult train(GoalModel& model, const DatasetShard& data, const TrainConfig& cfg,
                  const std::function<void(const TrainProgress&)>& on_step = {});

// Fresh model for cfg (random weights, schedule from cfg.timesteps).
GoalModel make_model(const TrainConfig& cfg, std::vector<ProblemKind> kinds);

}  // namespace goal

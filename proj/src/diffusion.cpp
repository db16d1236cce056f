#include "goal/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "goal/errors.hpp"

namespace goal {

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_1, double beta_T) {
  if (timesteps < 1) throw ConfigError("timesteps must be at least 1");
  if (!(beta_1 > 0.0) || !(beta_T >= beta_1)) throw ConfigError("need 0 < beta_1 <= beta_T");
  const double scale = 1000.0 / timesteps;
  NoiseSchedule s;
  s.t_ = timesteps;
  s.beta_start_ = beta_1;
  s.beta_end_ = beta_T;
  s.beta_.assign(timesteps + 1, 0.0);
  s.alpha_bar_.assign(timesteps + 1, 1.0);
  for (int t = 1; t <= timesteps; ++t) {
    const double ramp = timesteps == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * (t - 1) / (timesteps - 1);
    s.beta_[t] = std::min(ramp * scale, 0.999);
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
  }
  return s;
}

double NoiseSchedule::flip_between(int a, int b) const {
  if (a < 0 || b > t_ || a >= b) throw OrderingError("flip_between needs 0 <= a < b <= T");
  return (1.0 - alpha_bar(b) / alpha_bar(a)) / 2.0;
}

std::vector<std::uint8_t> q_sample(std::span<const std::uint8_t> x0, int k, int t, const NoiseSchedule& sched,
                                   Rng& rng) {
  if (x0.size() != static_cast<std::size_t>(k) * k) throw DimensionError("q_sample: x0 must hold K*K entries");
  if (t < 1 || t > sched.timesteps()) throw ConfigError("q_sample: t out of range");
  const double flip = (1.0 - sched.alpha_bar(t)) / 2.0;
  std::vector<std::uint8_t> out(x0.begin(), x0.end());
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      auto& bit = out[static_cast<std::size_t>(a) * k + b];
      if (a == b)
        bit = 0;
      else if (rng.uniform() < flip)
        bit ^= 1;
    }
  return out;
}

double posterior_from_flips(int x_b, double p, double u, double v) {
  double result = 0.0;
  for (int x0 = 0; x0 <= 1; ++x0) {
    const double w = x0 == 1 ? p : 1.0 - p;
    if (w == 0.0) continue;
    const double one = flip_kernel(x_b, 1, u) * flip_kernel(1, x0, v);
    const double zero = flip_kernel(x_b, 0, u) * flip_kernel(0, x0, v);
    const double norm = one + zero;
    result += w * (norm > 0.0 ? one / norm : static_cast<double>(x_b));
  }
  return result;
}

double posterior(int x_b, double p, int a, int b, const NoiseSchedule& sched) {
  if (a < 0 || b > sched.timesteps() || a >= b) throw OrderingError("posterior needs 0 <= a < b <= T");
  const double v = a == 0 ? 0.0 : sched.flip_between(0, a);
  return posterior_from_flips(x_b, p, sched.flip_between(a, b), v);
}

std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond, double gamma) {
  if (cond.size() != uncond.size()) throw DimensionError("cfg_combine: shape mismatch");
  std::vector<double> out(cond.begin(), cond.end());
  if (gamma == 1.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = uncond[i] + gamma * (cond[i] - uncond[i]);
  return out;
}

std::string_view to_string(TauSchedule s) { return s == TauSchedule::Linear ? "linear" : "cosine"; }

TauSchedule parse_tau_schedule(std::string_view text) {
  if (text == "linear") return TauSchedule::Linear;
  if (text == "cosine") return TauSchedule::Cosine;
  throw ConfigError("unknown schedule '" + std::string(text) + "' (linear|cosine)");
}

std::vector<int> tau_schedule(TauSchedule kind, int steps, int timesteps) {
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (steps > timesteps) throw ConfigError("steps must not exceed the diffusion horizon");
  std::vector<int> tau;
  if (steps == 1) return {timesteps};
  for (int i = 1; i <= steps; ++i) {
    int t = 0;
    if (kind == TauSchedule::Linear) {
      t = 1 + static_cast<int>(static_cast<long long>(i - 1) * (timesteps - 1) / (steps - 1));
    } else {
      const double c = static_cast<double>(i) / steps;
      t = static_cast<int>(std::floor((1.0 - std::cos(c * std::numbers::pi / 2.0)) * timesteps + 1e-9));
    }
    t = std::clamp(t, 1, timesteps);
    if (tau.empty() || t > tau.back()) tau.push_back(t);
  }
  return tau;
}

void check_sampler_config(const SamplerConfig& cfg, int timesteps) {
  if (cfg.steps < 1 || cfg.steps > timesteps)
    throw ConfigError("steps must lie in [1, " + std::to_string(timesteps) + "]");
  if (!(cfg.guidance >= 1.0)) throw ConfigError("guidance must be at least 1");
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
}

bool GoalModel::covers(ProblemKind kind) const {
  return std::find(kinds.begin(), kinds.end(), kind) != kinds.end();
}

void save_model(const GoalModel& model, const std::string& path) {
  if (!model.net) throw ConfigError("model has no network");
  nlohmann::json meta = model.metadata;
  meta["timesteps"] = model.schedule.timesteps();
  meta["beta_start"] = model.schedule.beta_start();
  meta["beta_end"] = model.schedule.beta_end();
  meta["kinds"] = nlohmann::json::array();
  for (auto k : model.kinds) meta["kinds"].push_back(to_string(k));
  meta["id"] = model.id;
  save_checkpoint(model.net->to_checkpoint(meta), path);
}

GoalModel load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  GoalModel model;
  model.net = std::make_unique<Denoiser<float>>(Denoiser<float>::from_checkpoint(ckpt));
  try {
    model.metadata = ckpt.header.at("metadata");
    model.schedule = NoiseSchedule::linear(model.metadata.at("timesteps").get<int>(),
                                           model.metadata.value("beta_start", 1e-4),
                                           model.metadata.value("beta_end", 0.02));
    for (const auto& k : model.metadata.at("kinds")) model.kinds.push_back(parse_problem_kind(k.get<std::string>()));
    model.id = model.metadata.value("id", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path + " lacks diffusion metadata: " + e.what());
  }
  return model;
}

SampleResult sample(GoalModel& model, const InstanceContext& ctx, const Target& u, const SamplerConfig& cfg,
                    int n_candidates, std::uint64_t seed) {
  if (!model.net) throw ConfigError("model has no network");
  check_sampler_config(cfg, model.schedule.timesteps());
  if (n_candidates < 1) throw ConfigError("need at least one candidate");
  const auto t0 = std::chrono::steady_clock::now();
  const int k = ctx.k;
  const std::size_t kk = static_cast<std::size_t>(k) * k;
  const bool guided = cfg.guidance != 1.0;
  const auto tau = tau_schedule(cfg.schedule, cfg.steps, model.schedule.timesteps());

  std::vector<Rng> rngs;
  std::vector<std::vector<std::uint8_t>> x(n_candidates, std::vector<std::uint8_t>(kk, 0));
  for (int c = 0; c < n_candidates; ++c) {
    rngs.emplace_back(seed, static_cast<std::uint64_t>(c));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        if (a != b) x[c][a * k + b] = rngs[c].bernoulli(0.5) ? 1 : 0;
  }

  std::vector<DenoiserInput> inputs(guided ? 2 * n_candidates : n_candidates);
  for (int i = static_cast<int>(tau.size()) - 1; i >= 0; --i) {
    const int t = tau[i];
    for (int c = 0; c < n_candidates; ++c) {
      inputs[c] = DenoiserInput{&ctx, x[c], t, u};
      if (guided) inputs[n_candidates + c] = DenoiserInput{&ctx, x[c], t, {0.0, 0.0}};
    }
    const auto logits = model.net->predict(inputs);
    const int a = i > 0 ? tau[i - 1] : 0;
    const double u_flip = i > 0 ? model.schedule.flip_between(a, t) : 0.0;
    const double v_flip = i > 0 ? model.schedule.flip_between(0, a) : 0.0;
    for (int c = 0; c < n_candidates; ++c) {
      const auto g = guided ? cfg_combine(logits[c], logits[n_candidates + c], cfg.guidance) : logits[c];
      for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) {
          if (p == q) continue;
          const std::size_t idx = static_cast<std::size_t>(p) * k + q;
          const double prob = 1.0 / (1.0 + std::exp(-g[idx]));
          if (i > 0)
            x[c][idx] = rngs[c].uniform() < posterior_from_flips(x[c][idx], prob, u_flip, v_flip) ? 1 : 0;
          else
            x[c][idx] = prob > cfg.threshold ? 1 : 0;
        }
    }
  }

  SampleResult result;
  for (int c = 0; c < n_candidates; ++c) {
    Candidate cand;
    cand.x = DecisionMatrix(k, ctx.instance.id);
    std::copy(x[c].begin(), x[c].end(), cand.x.bits().begin());
    cand.schedule = decode(cand.x, ctx.instance);
    cand.objectives = evaluate(cand.schedule, ctx.instance);
    result.candidates.push_back(std::move(cand));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainConfig TrainConfig::profile(std::string_view name) {
  TrainConfig cfg;
  if (name == "paper") {
    cfg.model.hidden = 128;
    cfg.model.layers = 12;
    cfg.model.embed_dim = 256;
    cfg.model.cond_dim = 256;
    cfg.timesteps = 1000;
    cfg.epochs = 25;
    cfg.batch = 64;
    cfg.lr = 1e-4;
  } else if (name == "desk") {
    cfg.model.hidden = 32;
    cfg.model.layers = 4;
    cfg.model.embed_dim = 64;
    cfg.model.cond_dim = 64;
    cfg.timesteps = 200;
    cfg.epochs = 40;
    cfg.batch = 32;
    cfg.lr = 3e-3;
    cfg.min_lr_ratio = 0.05;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "' (paper|desk)");
  }
  return cfg;
}

void check_train_config(const TrainConfig& cfg) {
  check_denoiser_config(cfg.model);
  if (cfg.timesteps < 1) throw ConfigError("timesteps must be at least 1");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch < 1) throw ConfigError("batch must be at least 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (cfg.p_drop < 0.0 || cfg.p_drop > 1.0) throw ConfigError("p_drop must lie in [0, 1]");
  if (!(cfg.clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(cfg.min_lr_ratio > 0.0 && cfg.min_lr_ratio <= 1.0)) throw ConfigError("min_lr_ratio must lie in (0, 1]");
}

GoalModel make_model(const TrainConfig& cfg, std::vector<ProblemKind> kinds) {
  check_train_config(cfg);
  GoalModel model;
  DenoiserConfig dc = cfg.model;
  dc.seed = cfg.seed;
  model.net = std::make_unique<Denoiser<float>>(dc);
  model.schedule = NoiseSchedule::linear(cfg.timesteps);
  model.kinds = std::move(kinds);
  return model;
}

TrainResult train(GoalModel& model, const DatasetShard& data, const TrainConfig& cfg,
                  const std::function<void(const TrainProgress&)>& on_step) {
  check_train_config(cfg);
  if (!model.net) throw ConfigError("model has no network");
  if (data.samples.empty()) throw ConfigError("training set is empty");
  if (model.schedule.timesteps() != cfg.timesteps) throw ConfigError("model schedule disagrees with timesteps");

  std::vector<std::shared_ptr<const InstanceContext>> contexts;
  contexts.reserve(data.instances.size());
  for (const auto& inst : data.instances) contexts.push_back(make_context(inst));

  auto& net = *model.net;
  AdamW<float> opt(net.store(), AdamWConfig{cfg.lr, cfg.weight_decay});
  Rng rng(cfg.seed, 0x7A1);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.samples.size();
  const long steps_per_epoch = static_cast<long>((n + cfg.batch - 1) / cfg.batch);
  const long total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  std::vector<std::size_t> order(n);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t end = std::min(n, start + cfg.batch);
      std::vector<std::vector<std::uint8_t>> noisy;
      std::vector<DenoiserInput> inputs;
      noisy.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data.samples[order[i]];
        const auto& ctx = *contexts.at(s.instance);
        const int t = rng.uniform_int(1, cfg.timesteps);
        noisy.push_back(q_sample(s.x.bits(), ctx.k, t, model.schedule, rng));
        Target u = s.u;
        if (rng.uniform() < cfg.p_drop) u = {0.0, 0.0};
        inputs.push_back(DenoiserInput{&ctx, noisy.back(), t, u});
      }
      const GraphBatch batch = make_batch(inputs, net.config());
      Tensor<float> target(batch.edges, 1);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data.samples[order[i]];
        const int b = static_cast<int>(i - start);
        const int k = batch.sizes[b];
        for (int p = 0; p < k; ++p)
          for (int q = 0; q < k; ++q)
            if (p != q) target.data[batch.edge_offset[b] + pair_index(k, p, q)] = s.x(p, q);
      }

      if (cfg.min_lr_ratio < 1.0 && total_steps > 1) {
        const double progress = static_cast<double>(step) / (total_steps - 1);
        opt.set_lr(cfg.lr * (cfg.min_lr_ratio + (1.0 - cfg.min_lr_ratio) * 0.5 *
                                                     (1.0 + std::cos(std::numbers::pi * progress))));
      }
      Tape<float> tape;
      net.store().zero_grad();
      const Var logits = net.forward(tape, batch, true);
      const Var loss = tape.bce_with_logits(logits, target);
      tape.backward(loss);
      clip_grad_norm(net.store(), cfg.clip_norm);
      opt.step();

      const double l = tape.value(loss).data[0];
      result.step_loss.push_back(l);
      epoch_sum += l;
      ++step;
      if (on_step) on_step(TrainProgress{epoch, step, total_steps, l});
    }
    result.epoch_loss.push_back(epoch_sum / steps_per_epoch);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace goal

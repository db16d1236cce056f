#include "goal/denoiser.hpp"

#include <algorithm>

#include "goal/errors.hpp"
#include "goal/rng.hpp"

namespace goal {

void check_denoiser_config(const DenoiserConfig& cfg) {
  if (cfg.hidden < 1 || cfg.layers < 1 || cfg.cond_dim < 1) throw ConfigError("denoiser sizes must be positive");
  if (cfg.embed_dim < 2 || cfg.embed_dim % 2 != 0) throw ConfigError("embed_dim must be even and positive");
  if (cfg.relations != kNumEdgeTypes) throw ConfigError("relations must equal " + std::to_string(kNumEdgeTypes));
  if (cfg.feature_length != kFeatureLength) throw ConfigError("feature_length must equal the encoder length");
}

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = {{"hidden", c.hidden},       {"embed_dim", c.embed_dim},           {"cond_dim", c.cond_dim},
       {"layers", c.layers},       {"relations", c.relations},           {"feature_length", c.feature_length},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  c.hidden = j.at("hidden").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.cond_dim = j.at("cond_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.relations = j.value("relations", kNumEdgeTypes);
  c.feature_length = j.value("feature_length", kFeatureLength);
  c.seed = j.value("seed", std::uint64_t{0});
}

std::shared_ptr<const InstanceContext> make_context(const Instance& inst) {
  auto ctx = std::make_shared<InstanceContext>();
  ctx->instance = inst;
  ctx->graph = build_graph(inst);
  ctx->k = inst.num_ops();
  const int k = ctx->k;
  const auto degrees = degree_features(ctx->graph);
  const double last_op = std::max(1, inst.n_ops_per_job - 1);
  ctx->node_inputs.resize(static_cast<std::size_t>(k) * kNodeInputs);
  for (int a = 0; a < k; ++a) {
    double* row = &ctx->node_inputs[static_cast<std::size_t>(a) * kNodeInputs];
    for (int c = 0; c < 2 * kNumEdgeTypes; ++c) row[c] = 0.1 * degrees[a][c];
    row[2 * kNumEdgeTypes] = static_cast<double>(inst.proc_time[inst.job_of(a)][inst.op_of(a)]) / kMaxProcTime;
    row[2 * kNumEdgeTypes + 1] = inst.op_of(a) / last_op;
  }
  ctx->indicators.resize(static_cast<std::size_t>(k) * std::max(0, k - 1));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      const auto base = structural_indicators(ctx->graph, a, b);
      auto& ind = ctx->indicators[pair_index(k, a, b)];
      std::copy(base.begin(), base.end(), ind.begin());
      ind[base.size()] = inst.job_of(a) == inst.job_of(b) && inst.op_of(a) < inst.op_of(b);
    }
  ctx->features = encode_instance_features(inst).values;
  for (int t = 0; t < kNumEdgeTypes; ++t) ctx->relation_edges[t] = ctx->graph.edges(t);
  return ctx;
}

GraphBatch make_batch(std::span<const DenoiserInput> inputs, const DenoiserConfig& cfg) {
  GraphBatch b;
  b.samples = static_cast<int>(inputs.size());
  for (const auto& in : inputs) {
    if (in.context == nullptr) throw ConfigError("denoiser input without instance context");
    const int k = in.context->k;
    if (in.x_t.size() != static_cast<std::size_t>(k) * k)
      throw DimensionError("x_t has " + std::to_string(in.x_t.size()) + " entries, expected " + std::to_string(k * k));
    b.node_offset.push_back(b.nodes);
    b.edge_offset.push_back(b.edges);
    b.sizes.push_back(k);
    b.nodes += k;
    b.edges += k * (k - 1);
  }
  b.node_in = Tensor<double>(b.nodes, kNodeInputs);
  b.edge_in = Tensor<double>(b.edges, kEdgeInputs);
  b.time_in = Tensor<double>(b.samples, cfg.embed_dim);
  b.feature_in = Tensor<double>(b.samples, cfg.feature_length);
  b.target_in = Tensor<double>(b.samples, kObjectiveInputs);

  std::vector<int> node_sample(b.nodes), edge_sample(b.edges), edge_a(b.edges), edge_b(b.edges);
  std::array<std::vector<int>, kNumEdgeTypes> rel_pair, rel_recv, rel_send;
  for (int s = 0; s < b.samples; ++s) {
    const auto& in = inputs[s];
    const auto& ctx = *in.context;
    const int k = ctx.k;
    const int n0 = b.node_offset[s];
    const int e0 = b.edge_offset[s];
    std::copy(ctx.node_inputs.begin(), ctx.node_inputs.end(), b.node_in.row(n0));
    std::fill(node_sample.begin() + n0, node_sample.begin() + n0 + k, s);
    for (int a = 0; a < k; ++a)
      for (int c = 0; c < k; ++c) {
        if (a == c) continue;
        const int pi = pair_index(k, a, c);
        const int row = e0 + pi;
        double* dst = b.edge_in.row(row);
        dst[0] = in.x_t[static_cast<std::size_t>(a) * k + c] ? 1.0 : -1.0;
        for (int f = 0; f < kEdgeInputs - 1; ++f) dst[f + 1] = ctx.indicators[pi][f];
        edge_sample[row] = s;
        edge_a[row] = n0 + a;
        edge_b[row] = n0 + c;
      }
    for (int t = 0; t < kNumEdgeTypes; ++t)
      for (const auto& [recv, send] : ctx.relation_edges[t]) {
        rel_pair[t].push_back(e0 + pair_index(k, recv, send));
        rel_recv[t].push_back(n0 + recv);
        rel_send[t].push_back(n0 + send);
      }
    const auto emb = sinusoidal_embedding(in.t, cfg.embed_dim);
    std::copy(emb.begin(), emb.end(), b.time_in.row(s));
    if (static_cast<int>(ctx.features.size()) != cfg.feature_length) throw DimensionError("feature length mismatch");
    std::copy(ctx.features.begin(), ctx.features.end(), b.feature_in.row(s));
    double* obj = b.target_in.row(s);
    for (int i = 0; i < 2; ++i) {
      obj[i] = in.u[i];
      const auto lift = sinusoidal_embedding(in.u[i] * kObjectiveScale, kObjectiveEmbed);
      std::copy(lift.begin(), lift.end(), obj + 2 + i * kObjectiveEmbed);
    }
  }
  auto share = [](std::vector<int>& v) { return std::make_shared<const std::vector<int>>(std::move(v)); };
  b.node_sample = share(node_sample);
  b.edge_sample = share(edge_sample);
  b.edge_a = share(edge_a);
  b.edge_b = share(edge_b);
  for (int t = 0; t < kNumEdgeTypes; ++t) {
    b.rel_pair[t] = share(rel_pair[t]);
    b.rel_receiver[t] = share(rel_recv[t]);
    b.rel_sender[t] = share(rel_send[t]);
  }
  return b;
}

namespace {

template <typename T>
Tensor<T> cast(const Tensor<double>& src) {
  Tensor<T> out(src.rows, src.cols);
  std::transform(src.data.begin(), src.data.end(), out.data.begin(), [](double v) { return static_cast<T>(v); });
  return out;
}

template <typename T>
std::vector<double> dense_logits_impl(const Tensor<T>& out, const GraphBatch& batch, int s) {
  const int k = batch.sizes.at(s);
  const int e0 = batch.edge_offset[s];
  std::vector<double> dense(static_cast<std::size_t>(k) * k, kDiagonalLogit);
  for (int a = 0; a < k; ++a)
    for (int c = 0; c < k; ++c)
      if (a != c) dense[static_cast<std::size_t>(a) * k + c] = out.data[e0 + pair_index(k, a, c)];
  return dense;
}

}  // namespace

std::vector<double> dense_logits(const Tensor<float>& out, const GraphBatch& batch, int s) {
  return dense_logits_impl(out, batch, s);
}
std::vector<double> dense_logits(const Tensor<double>& out, const GraphBatch& batch, int s) {
  return dense_logits_impl(out, batch, s);
}

template <typename T>
Denoiser<T>::Denoiser(const DenoiserConfig& cfg) : cfg_(cfg) {
  check_denoiser_config(cfg);
  Rng rng(cfg.seed, 0xDE);
  const int h = cfg.hidden;
  const int dc = cfg.cond_dim;
  auto lin = [&](const std::string& name, int in, int out, bool bias) {
    return Linear<T>::create(store_, name, in, out, bias, rng);
  };
  time0_ = lin("time.0", cfg.embed_dim, dc, true);
  time1_ = lin("time.1", dc, dc, true);
  inst0_ = lin("instance.0", cfg.feature_length, dc, true);
  inst1_ = lin("instance.1", dc, dc, true);
  inst2_ = lin("instance.2", dc, dc, true);
  obj0_ = lin("objective.0", kObjectiveInputs, dc, true);
  obj1_ = lin("objective.1", dc, dc, true);
  node_init_ = lin("node_init", kNodeInputs, h, true);
  edge_init_ = lin("edge_init", kEdgeInputs, h, true);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.u = lin(p + "U", h, h, false);
    layer.w_m = lin(p + "W_m", kNumEdgeTypes * h, h, false);
    layer.w_t = lin(p + "W_t", dc, h, false);
    layer.w_s = lin(p + "W_s", dc, h, false);
    layer.w_o = lin(p + "W_o", dc, h, false);
    for (int j = 0; j < kNumEdgeTypes; ++j) {
      const std::string r = std::to_string(j);
      layer.v[j] = lin(p + "V" + r, h, h, false);
      layer.p[j] = lin(p + "P" + r, h, h, false);
      layer.q[j] = lin(p + "Q" + r, h, h, false);
      layer.r[j] = lin(p + "R" + r, h, h, false);
    }
    layer.mlp_e0 = lin(p + "mlp_e.0", h, h, true);
    layer.mlp_e1 = lin(p + "mlp_e.1", h, h, true);
    layer.bn_node = &store_.create_batchnorm(p + "bn_node", h);
    for (int j = 0; j < kNumEdgeTypes; ++j)
      layer.bn_edge[j] = &store_.create_batchnorm(p + "bn_edge" + std::to_string(j), h);
    layers_.push_back(layer);
  }
  read0_ = lin("readout.0", kNumEdgeTypes * h, h, true);
  read_bn_ = &store_.create_batchnorm("readout.bn", h);
  read1_ = lin("readout.1", h, 1, true);
}

template <typename T>
Var Denoiser<T>::forward(Tape<T>& tape, const GraphBatch& batch, bool training) {
  if (batch.time_in.cols != cfg_.embed_dim || batch.feature_in.cols != cfg_.feature_length)
    throw DimensionError("batch was built for a different denoiser config");

  const Var e_t = time1_(tape, tape.silu(time0_(tape, tape.constant(cast<T>(batch.time_in)))));
  const Var e_s = inst2_(tape, tape.silu(inst1_(tape, tape.silu(inst0_(tape, tape.constant(cast<T>(batch.feature_in)))))));
  const Var e_o = obj1_(tape, tape.silu(obj0_(tape, tape.constant(cast<T>(batch.target_in)))));

  Var h = node_init_(tape, tape.constant(cast<T>(batch.node_in)));
  const Var e_init = edge_init_(tape, tape.constant(cast<T>(batch.edge_in)));
  std::array<Var, kNumEdgeTypes> e;
  e.fill(e_init);

  for (auto& layer : layers_) {
    const Var c = tape.add(tape.add(layer.w_t(tape, e_t), layer.w_s(tape, e_s)), layer.w_o(tape, e_o));
    const Var c_node = tape.gather_rows(c, batch.node_sample);
    const Var c_edge = tape.gather_rows(c, batch.edge_sample);

    std::array<Var, kNumEdgeTypes> agg;
    for (int j = 0; j < kNumEdgeTypes; ++j) {
      const Var gate = tape.sigmoid(tape.gather_rows(e[j], batch.rel_pair[j]));
      const Var msg = tape.hadamard(gate, tape.gather_rows(layer.v[j](tape, h), batch.rel_sender[j]));
      agg[j] = tape.scatter_add_rows(msg, batch.rel_receiver[j], batch.nodes);
    }
    const Var pre = tape.add(tape.add(layer.u(tape, h), layer.w_m(tape, tape.concat_cols(agg))), c_node);
    const Var h_next = tape.add(h, tape.relu(tape.batchnorm(pre, *layer.bn_node, training)));

    for (int j = 0; j < kNumEdgeTypes; ++j) {
      const Var mixed = tape.add(tape.add(layer.p[j](tape, e[j]), tape.gather_rows(layer.q[j](tape, h), batch.edge_a)),
                                 tape.gather_rows(layer.r[j](tape, h), batch.edge_b));
      const Var z = tape.add(tape.batchnorm(mixed, *layer.bn_edge[j], training), c_edge);
      e[j] = tape.add(e[j], layer.mlp_e1(tape, tape.relu(layer.mlp_e0(tape, z))));
    }
    h = h_next;
  }

  const Var r = read0_(tape, tape.concat_cols(e));
  return read1_(tape, tape.relu(tape.batchnorm(r, *read_bn_, training)));
}

template <typename T>
std::vector<std::vector<double>> Denoiser<T>::predict(std::span<const DenoiserInput> inputs) {
  const GraphBatch batch = make_batch(inputs, cfg_);
  Tape<T> tape(false);
  const Var out = forward(tape, batch, false);
  std::vector<std::vector<double>> result;
  result.reserve(inputs.size());
  for (int s = 0; s < batch.samples; ++s) result.push_back(dense_logits(tape.value(out), batch, s));
  return result;
}

template <typename T>
Checkpoint Denoiser<T>::to_checkpoint(const nlohmann::json& metadata) const {
  Checkpoint ckpt;
  ckpt.header = {{"format", "goal-denoiser"}, {"config", cfg_}, {"metadata", metadata}};
  auto add = [&](const std::string& name, const Tensor<T>& t) {
    CheckpointTensor ct{name, t.rows, t.cols, std::vector<double>(t.data.begin(), t.data.end())};
    ckpt.tensors.push_back(std::move(ct));
  };
  for (const auto& p : store_.params()) add(p->name, p->value);
  for (const auto& bn : store_.norms()) {
    add(bn->name + ".running_mean", bn->running_mean);
    add(bn->name + ".running_var", bn->running_var);
  }
  return ckpt;
}

template <typename T>
Denoiser<T> Denoiser<T>::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.header.value("format", std::string{}) != "goal-denoiser") throw FormatError("not a denoiser checkpoint");
  DenoiserConfig cfg;
  try {
    cfg = ckpt.header.at("config").get<DenoiserConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad denoiser config in checkpoint: ") + e.what());
  }
  Denoiser model(cfg);
  auto fill = [&](const std::string& name, Tensor<T>& dst) {
    const CheckpointTensor* src = ckpt.find(name);
    if (src == nullptr) throw FormatError("checkpoint lacks tensor " + name);
    if (src->rows != dst.rows || src->cols != dst.cols) throw FormatError("shape mismatch for tensor " + name);
    std::transform(src->values.begin(), src->values.end(), dst.data.begin(),
                   [](double v) { return static_cast<T>(v); });
  };
  for (const auto& p : model.store_.params()) fill(p->name, p->value);
  for (const auto& bn : model.store_.norms()) {
    fill(bn->name + ".running_mean", bn->running_mean);
    fill(bn->name + ".running_var", bn->running_var);
  }
  return model;
}

template class Denoiser<float>;
template class Denoiser<double>;

}  // namespace goal

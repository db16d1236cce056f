#include "goal/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace goal {

template <typename T>
Linear<T> Linear<T>::create(ParamStore<T>& store, const std::string& name, int in, int out, bool with_bias,
                            Rng& rng) {
  if (in <= 0 || out <= 0) throw ConfigError("linear layer " + name + " needs positive sizes");
  Linear layer;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  layer.weight = &store.create(name + ".weight", in, out);
  for (auto& w : layer.weight->value.data) w = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  if (with_bias) {
    layer.bias = &store.create(name + ".bias", 1, out);
    for (auto& b : layer.bias->value.data) b = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  }
  return layer;
}

template <typename T>
Var Linear<T>::operator()(Tape<T>& tape, Var x) const {
  Var y = tape.matmul(x, tape.param(*weight));
  if (bias != nullptr) y = tape.add_row(y, tape.param(*bias));
  return y;
}

template <typename T>
AdamW<T>::AdamW(ParamStore<T>& store, AdamWConfig cfg) : store_(store), cfg_(cfg) {
  for (const auto& p : store_.params()) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
      double w = p.value.data[k];
      w -= cfg_.lr * cfg_.weight_decay * w;
      w -= cfg_.lr * update;
      p.value.data[k] = static_cast<T>(w);
    }
  }
}

template <typename T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.params())
    for (T g : p->grad.data) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& p : store.params())
      for (T& g : p->grad.data) g *= scale;
  }
  return norm;
}

std::vector<double> sinusoidal_embedding(double t, int d) {
  if (d <= 0 || d % 2 != 0) throw ConfigError("embedding dimension must be positive and even");
  std::vector<double> out(d);
  for (int i = 0; i < d / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / d);
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

constexpr char kMagic[8] = {'G', 'O', 'A', 'L', 'C', 'K', 'P', 'T'};

template <typename U>
void write_le(std::ostream& out, U value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const std::string& path) {
  U value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(U))) throw FormatError("truncated checkpoint " + path);
  return value;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header = ckpt.header;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != static_cast<std::size_t>(t.rows) * t.cols)
      throw DimensionError("checkpoint tensor " + t.name + " has inconsistent shape");
    header["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors)
    for (double v : t.values) write_le<double>(out, v);
  if (!out) throw FormatError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError(path + " is not a checkpoint");
  const auto version = read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = read_le<std::uint64_t>(in, path);
  if (header_len > (1ULL << 30)) throw FormatError("implausible checkpoint header in " + path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw FormatError("truncated checkpoint " + path);
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(text);
    for (const auto& entry : ckpt.header.at("tensors")) {
      CheckpointTensor t;
      t.name = entry.at("name").get<std::string>();
      t.rows = entry.at("rows").get<int>();
      t.cols = entry.at("cols").get<int>();
      if (t.rows < 0 || t.cols < 0) throw FormatError("negative shape for " + t.name);
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path + ": " + e.what());
  }
  for (auto& t : ckpt.tensors) {
    t.values.resize(static_cast<std::size_t>(t.rows) * t.cols);
    for (auto& v : t.values) v = read_le<double>(in, path);
  }
  ckpt.header.erase("tensors");
  return ckpt;
}

template struct Linear<float>;
template struct Linear<double>;
template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

}  // namespace goal

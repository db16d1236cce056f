#include "goal/tape.hpp"

#include <cmath>
#include <mutex>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "goal/kernels.hpp"

namespace goal {

namespace {

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

}  // namespace

void retain_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc maximum on 64-bit
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

template <typename T>
void Tape<T>::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw InternalError("invalid tape variable");
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = record_grad_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  check(v);
  return nodes_[v.id].value();
}

template <typename T>
Tensor<T>& Tape<T>::grad_of(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0 && n.value().size() != 0) n.grad = Tensor<T>(n.value().rows, n.value().cols);
  return n.grad;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false);
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.ref = &p.value;
  n.requires_grad = record_grad_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[&p] = id;
  return Var{id};
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols != B.rows)
    throw DimensionError("matmul: inner dimensions " + std::to_string(A.cols) + " vs " + std::to_string(B.rows));
  Tensor<T> C(A.rows, B.cols);
  kernels::gemm<T>(false, false, A.rows, B.cols, A.cols, A.data.data(), A.cols, B.data.data(), B.cols,
                   C.data.data(), C.cols);
  const Var out = push(std::move(C), needs(a) || needs(b));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, b, out] {
      const auto& A = value(a);
      const auto& B = value(b);
      const auto& G = nodes_[out.id].grad;
      if (needs(a)) {
        auto& dA = grad_of(a);
        kernels::gemm<T>(false, true, A.rows, A.cols, B.cols, G.data.data(), G.cols, B.data.data(), B.cols,
                         dA.data.data(), dA.cols);
      }
      if (needs(b)) {
        auto& dB = grad_of(b);
        kernels::gemm<T>(true, false, B.rows, B.cols, A.rows, A.data.data(), A.cols, G.data.data(), G.cols,
                         dB.data.data(), dB.cols);
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  check(a);
  check(b);
  require_same_shape(value(a), value(b), "add");
  Tensor<T> out_v = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < out_v.size(); ++i) out_v.data[i] += B.data[i];
  const Var out = push(std::move(out_v), needs(a) || needs(b));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, b, out] {
      const auto& G = nodes_[out.id].grad;
      for (Var v : {a, b}) {
        if (!needs(v)) continue;
        auto& d = grad_of(v);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i];
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row) {
  check(a);
  check(row);
  const auto& R = value(row);
  if (R.rows != 1 || R.cols != value(a).cols) throw DimensionError("add_row: row must be 1 x cols");
  Tensor<T> out_v = value(a);
  for (int r = 0; r < out_v.rows; ++r) {
    T* dst = out_v.row(r);
    for (int c = 0; c < out_v.cols; ++c) dst[c] += R.data[c];
  }
  const Var out = push(std::move(out_v), needs(a) || needs(row));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, row, out] {
      const auto& G = nodes_[out.id].grad;
      if (needs(a)) {
        auto& d = grad_of(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i];
      }
      if (needs(row)) {
        auto& d = grad_of(row);
        for (int r = 0; r < G.rows; ++r) {
          const T* g = G.row(r);
          for (int c = 0; c < G.cols; ++c) d.data[c] += g[c];
        }
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::hadamard(Var a, Var b) {
  check(a);
  check(b);
  require_same_shape(value(a), value(b), "hadamard");
  Tensor<T> out_v = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < out_v.size(); ++i) out_v.data[i] *= B.data[i];
  const Var out = push(std::move(out_v), needs(a) || needs(b));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, b, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& A = value(a);
      const auto& B = value(b);
      if (needs(a)) {
        auto& d = grad_of(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i] * B.data[i];
      }
      if (needs(b)) {
        auto& d = grad_of(b);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i] * A.data[i];
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::scale(Var a, T s) {
  check(a);
  Tensor<T> out_v = value(a);
  for (auto& x : out_v.data) x *= s;
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, out, s] {
      const auto& G = nodes_[out.id].grad;
      auto& d = grad_of(a);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += s * G.data[i];
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const int rows = value(parts[0]).rows;
  int cols = 0;
  bool any = false;
  for (Var p : parts) {
    check(p);
    if (value(p).rows != rows) throw DimensionError("concat_cols: row mismatch");
    cols += value(p).cols;
    any = any || needs(p);
  }
  Tensor<T> out_v(rows, cols);
  int offset = 0;
  for (Var p : parts) {
    const auto& P = value(p);
    for (int r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + P.cols, out_v.row(r) + offset);
    offset += P.cols;
  }
  const Var out = push(std::move(out_v), any);
  if (nodes_[out.id].requires_grad) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    nodes_[out.id].backward = [this, inputs = std::move(inputs), out] {
      const auto& G = nodes_[out.id].grad;
      int offset = 0;
      for (Var p : inputs) {
        const int pc = value(p).cols;
        if (needs(p)) {
          auto& d = grad_of(p);
          for (int r = 0; r < G.rows; ++r) {
            const T* g = G.row(r) + offset;
            T* dst = d.row(r);
            for (int c = 0; c < pc; ++c) dst[c] += g[c];
          }
        }
        offset += pc;
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
  check(a);
  Tensor<T> out_v = value(a);
  for (auto& x : out_v.data) x = sigmoid_scalar(x);
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& S = value(out);
      auto& d = grad_of(a);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += G.data[i] * S.data[i] * (T(1) - S.data[i]);
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::relu(Var a) {
  check(a);
  Tensor<T> out_v = value(a);
  for (auto& x : out_v.data) x = x > T(0) ? x : T(0);
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& Y = value(out);
      auto& d = grad_of(a);
      for (std::size_t i = 0; i < d.size(); ++i)
        if (Y.data[i] > T(0)) d.data[i] += G.data[i];
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::silu(Var a) {
  check(a);
  Tensor<T> out_v = value(a);
  for (auto& x : out_v.data) x = x * sigmoid_scalar(x);
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& X = value(a);
      auto& d = grad_of(a);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const T s = sigmoid_scalar(X.data[i]);
        d.data[i] += G.data[i] * s * (T(1) + X.data[i] * (T(1) - s));
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::batchnorm(Var x, BatchNorm<T>& bn, bool training) {
  check(x);
  // param() may grow the node list, so take references afterwards.
  const Var gamma = param(*bn.gamma);
  const Var beta = param(*bn.beta);
  const auto& X = value(x);
  const int rows = X.rows;
  const int cols = X.cols;
  if (cols != bn.running_mean.cols) throw DimensionError("batchnorm: feature count mismatch for " + bn.name);

  auto mean = std::make_shared<std::vector<T>>(cols, T(0));
  auto inv_std = std::make_shared<std::vector<T>>(cols, T(0));
  if (training && rows > 0) {
    std::vector<T> var(cols, T(0));
    for (int r = 0; r < rows; ++r) {
      const T* xr = X.row(r);
      for (int c = 0; c < cols; ++c) (*mean)[c] += xr[c];
    }
    for (auto& m : *mean) m /= T(rows);
    for (int r = 0; r < rows; ++r) {
      const T* xr = X.row(r);
      for (int c = 0; c < cols; ++c) {
        const T d = xr[c] - (*mean)[c];
        var[c] += d * d;
      }
    }
    for (int c = 0; c < cols; ++c) {
      const T biased = var[c] / T(rows);
      (*inv_std)[c] = T(1) / std::sqrt(biased + bn.eps);
      const T unbiased = rows > 1 ? var[c] / T(rows - 1) : biased;
      bn.running_mean.data[c] = (T(1) - bn.momentum) * bn.running_mean.data[c] + bn.momentum * (*mean)[c];
      bn.running_var.data[c] = (T(1) - bn.momentum) * bn.running_var.data[c] + bn.momentum * unbiased;
    }
  } else {
    for (int c = 0; c < cols; ++c) {
      (*mean)[c] = bn.running_mean.data[c];
      (*inv_std)[c] = T(1) / std::sqrt(bn.running_var.data[c] + bn.eps);
    }
  }

  const auto& g = value(gamma).data;
  const auto& b = value(beta).data;
  auto xhat = std::make_shared<Tensor<T>>(rows, cols);
  Tensor<T> out_v(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const T* xr = X.row(r);
    T* hr = xhat->row(r);
    T* yr = out_v.row(r);
    for (int c = 0; c < cols; ++c) {
      hr[c] = (xr[c] - (*mean)[c]) * (*inv_std)[c];
      yr[c] = g[c] * hr[c] + b[c];
    }
  }
  const Var out = push(std::move(out_v), needs(x) || needs(gamma) || needs(beta));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, x, gamma, beta, out, xhat, inv_std, training] {
      const auto& G = nodes_[out.id].grad;
      const int rows = G.rows;
      const int cols = G.cols;
      std::vector<T> sum_g(cols, T(0)), sum_gh(cols, T(0));
      for (int r = 0; r < rows; ++r) {
        const T* gr = G.row(r);
        const T* hr = xhat->row(r);
        for (int c = 0; c < cols; ++c) {
          sum_g[c] += gr[c];
          sum_gh[c] += gr[c] * hr[c];
        }
      }
      if (needs(gamma)) {
        auto& d = grad_of(gamma);
        for (int c = 0; c < cols; ++c) d.data[c] += sum_gh[c];
      }
      if (needs(beta)) {
        auto& d = grad_of(beta);
        for (int c = 0; c < cols; ++c) d.data[c] += sum_g[c];
      }
      if (needs(x)) {
        const auto& gm = value(gamma).data;
        auto& d = grad_of(x);
        for (int r = 0; r < rows; ++r) {
          const T* gr = G.row(r);
          const T* hr = xhat->row(r);
          T* dr = d.row(r);
          for (int c = 0; c < cols; ++c) {
            const T scale = gm[c] * (*inv_std)[c];
            if (training)
              dr[c] += scale * (gr[c] - sum_g[c] / T(rows) - hr[c] * sum_gh[c] / T(rows));
            else
              dr[c] += scale * gr[c];
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::sum_rows(Var a) {
  check(a);
  const auto& A = value(a);
  Tensor<T> out_v(1, A.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) out_v.data[c] += A(r, c);
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, out] {
      const auto& G = nodes_[out.id].grad;
      auto& d = grad_of(a);
      for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c) d(r, c) += G.data[c];
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::gather_rows(Var a, Index index) {
  check(a);
  const auto& A = value(a);
  const int n = static_cast<int>(index->size());
  Tensor<T> out_v(n, A.cols);
  for (int r = 0; r < n; ++r) {
    const int src = (*index)[r];
    if (src < 0 || src >= A.rows) throw DimensionError("gather_rows: index out of range");
    std::copy(A.row(src), A.row(src) + A.cols, out_v.row(r));
  }
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, index, out] {
      const auto& G = nodes_[out.id].grad;
      auto& d = grad_of(a);
      for (int r = 0; r < G.rows; ++r) {
        const T* g = G.row(r);
        T* dst = d.row((*index)[r]);
        for (int c = 0; c < G.cols; ++c) dst[c] += g[c];
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::scatter_add_rows(Var a, Index index, int n_rows) {
  check(a);
  const auto& A = value(a);
  if (static_cast<int>(index->size()) != A.rows) throw DimensionError("scatter_add_rows: index length mismatch");
  Tensor<T> out_v(n_rows, A.cols);
  for (int r = 0; r < A.rows; ++r) {
    const int dst_row = (*index)[r];
    if (dst_row < 0 || dst_row >= n_rows) throw DimensionError("scatter_add_rows: index out of range");
    const T* src = A.row(r);
    T* dst = out_v.row(dst_row);
    for (int c = 0; c < A.cols; ++c) dst[c] += src[c];
  }
  const Var out = push(std::move(out_v), needs(a));
  if (nodes_[out.id].requires_grad) {
    nodes_[out.id].backward = [this, a, index, out] {
      const auto& G = nodes_[out.id].grad;
      auto& d = grad_of(a);
      for (int r = 0; r < d.rows; ++r) {
        const T* g = G.row((*index)[r]);
        T* dst = d.row(r);
        for (int c = 0; c < d.cols; ++c) dst[c] += g[c];
      }
    };
  }
  return out;
}

template <typename T>
Var Tape<T>::bce_with_logits(Var logits, const Tensor<T>& targets) {
  check(logits);
  const auto& Z = value(logits);
  require_same_shape(Z, targets, "bce_with_logits");
  const std::size_t n = Z.size();
  if (n == 0) throw DimensionError("bce_with_logits: empty input");
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T z = Z.data[i];
    const T softplus = std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
    total += softplus - targets.data[i] * z;
  }
  Tensor<T> out_v(1, 1, total / T(n));
  const Var out = push(std::move(out_v), needs(logits));
  if (nodes_[out.id].requires_grad) {
    auto y = std::make_shared<Tensor<T>>(targets);
    nodes_[out.id].backward = [this, logits, out, y] {
      const T g = nodes_[out.id].grad.data[0];
      const auto& Z = value(logits);
      auto& d = grad_of(logits);
      const T inv_n = T(1) / T(Z.size());
      for (std::size_t i = 0; i < Z.size(); ++i)
        d.data[i] += g * (sigmoid_scalar(Z.data[i]) - y->data[i]) * inv_n;
    };
  }
  return out;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  check(loss);
  if (!record_grad_) throw InternalError("backward() on a tape that does not record gradients");
  if (value(loss).size() != 1) throw DimensionError("backward() needs a scalar loss");
  if (!needs(loss)) return;
  grad_of(loss).data[0] = T(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward();
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg.data[i] += n.grad.data[i];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace goal

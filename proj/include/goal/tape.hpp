#pragma once
// Reverse-mode differentiation over whole matrices. Each op stores its output
// and, when gradients are recorded, an adjoint rule that runs in reverse
// order during backward().

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "goal/tensor.hpp"

namespace goal {

struct Var {
  int id = -1;
};

// Tapes allocate and free many large tensors per step. With glibc defaults
// those are mmap-ed or trimmed back to the kernel and faulted in again on the
// next step, which costs more than the arithmetic. Raises the thresholds once.
void retain_freed_memory();

template <typename T>
class Tape {
 public:
  using Index = std::shared_ptr<const std::vector<int>>;

  // record_grad = false skips adjoint bookkeeping (inference).
  explicit Tape(bool record_grad = true) : record_grad_(record_grad) { retain_freed_memory(); }

  Var constant(Tensor<T> value);
  // One leaf per parameter per tape; backward() accumulates into param.grad.
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  int rows(Var v) const { return value(v).rows; }
  int cols(Var v) const { return value(v).cols; }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a + row, with row (1 x cols) broadcast over every row of a.
  Var add_row(Var a, Var row);
  Var hadamard(Var a, Var b);
  Var scale(Var a, T s);
  Var concat_cols(std::span<const Var> parts);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var silu(Var a);
  // Training mode normalizes with batch statistics over rows and updates the
  // running statistics; otherwise the running statistics are used.
  Var batchnorm(Var x, BatchNorm<T>& bn, bool training);
  // Column sums, 1 x cols.
  Var sum_rows(Var a);
  // out[r] = a[index[r]]
  Var gather_rows(Var a, Index index);
  // out (n_rows x cols) with out[index[r]] += a[r]
  Var scatter_add_rows(Var a, Index index, int n_rows);
  // Mean over entries of softplus(z) - y z; a 1 x 1 result.
  Var bce_with_logits(Var logits, const Tensor<T>& targets);

  // Seeds d(loss)/d(loss) = 1 for a 1 x 1 node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::function<void()> backward;

    const Tensor<T>& value() const { return ref ? *ref : owned; }
  };

  Var push(Tensor<T> value, bool requires_grad);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  Tensor<T>& grad_of(Var v);
  void check(Var v) const;

  bool record_grad_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> param_nodes_;
};

}  // namespace goal

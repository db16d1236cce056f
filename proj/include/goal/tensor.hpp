#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "goal/errors.hpp"

namespace goal {

// Row-major dense matrix. Batched graph data is flattened into rows
// (nodes or edges of every sample) and feature columns.
template <typename T>
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  std::size_t size() const { return data.size(); }
  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  T operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, int rows, int cols) : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
  void zero_grad() { grad.fill(T(0)); }
};

// Affine batch normalization over rows with running statistics.
template <typename T>
struct BatchNorm {
  std::string name;
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

// Owns every learnable parameter and normalization layer of a model; the
// addresses stay stable for the lifetime of the store.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, int rows, int cols) {
    for (const auto& p : params_)
      if (p->name == name) throw ConfigError("duplicate parameter name " + name);
    params_.push_back(std::make_unique<Parameter<T>>(name, rows, cols));
    return *params_.back();
  }

  BatchNorm<T>& create_batchnorm(const std::string& name, int features) {
    auto bn = std::make_unique<BatchNorm<T>>();
    bn->name = name;
    bn->gamma = &create(name + ".gamma", 1, features);
    bn->beta = &create(name + ".beta", 1, features);
    bn->gamma->value.fill(T(1));
    bn->running_mean = Tensor<T>(1, features, T(0));
    bn->running_var = Tensor<T>(1, features, T(1));
    norms_.push_back(std::move(bn));
    return *norms_.back();
  }

  std::span<const std::unique_ptr<Parameter<T>>> params() const { return params_; }
  std::span<const std::unique_ptr<BatchNorm<T>>> norms() const { return norms_; }

  Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::vector<std::unique_ptr<BatchNorm<T>>> norms_;
};

}  // namespace goal

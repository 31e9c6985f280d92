#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape records primitive applications in creation order, which is a
// topological order; backward() walks it in reverse. Parameters live in a
// ParameterStore and enter a tape as leaves whose gradients are accumulated
// into the store. Tensors used by the primitives are rank-2 (rows x cols); a
// scalar is a 1x1 tensor.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace confusio::ad {

using Shape = std::vector<std::size_t>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor row(std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  // The single element of a size-1 tensor.
  double item() const;

  bool all_finite() const noexcept;
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor m;  // first-moment estimate
  Tensor v;  // second-moment estimate
};

class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return params_.contains(name); }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::map<std::string, Parameter>& items() noexcept { return params_; }
  const std::map<std::string, Parameter>& items() const noexcept { return params_; }

  void zero_grad();
  // Total number of scalar parameters.
  std::size_t parameter_count() const;
  std::size_t step() const noexcept { return step_; }
  void set_step(std::size_t step) noexcept { step_ = step; }

 private:
  std::map<std::string, Parameter> params_;
  std::size_t step_ = 0;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  // With `record` false no backward closures are kept (inference mode).
  explicit Tape(ParameterStore* params = nullptr, bool record = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // A differentiable leaf that is not a stored parameter.
  Var leaf(Tensor value);
  // Parameter leaf; repeated requests for one name return the same node.
  Var param(const std::string& name);

  const Tensor& value(std::size_t id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient after backward(); empty when none reached the node.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  // Zero-initialised accumulator for `id`, or nullptr when it needs none.
  Tensor* grad_slot(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

  // Exact reverse-mode gradients of the scalar `loss`; parameter gradients
  // are added into the store.
  void backward(Var loss);

  // Used by primitives. `parents` decide whether the node needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> parents, Backward fn);
  Var push(Tensor value, std::span<const Var> parents, Backward fn);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }
  ParameterStore* params() const noexcept { return params_; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* param_grad = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  ParameterStore* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
};

// --- primitives ------------------------------------------------------------

// a: n x k, b: k x m (or m x k with transpose_b) -> n x m.
Var matmul(Var a, Var b, bool transpose_b = false);
// Elementwise; either operand may be a scalar.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
// Concatenate rank-2 tensors along axis 0 (rows) or 1 (columns).
Var concat(std::span<const Var> parts, std::size_t axis);
Var tanh(Var x);
// Row-wise softmax over the last axis.
Var softmax(Var x);
// Natural log of max(x, eps); the clamp keeps log finite at 0.
inline constexpr double kLogEpsilon = 1e-9;
Var log(Var x, double eps = kLogEpsilon);
// Rows of `table` selected by `indices`.
Var embedding(Var table, std::span<const std::size_t> indices);
// Per-row normalisation with gain and bias (both 1 x cols).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var sum(Var x);
Var mean(Var x);
// Column-wise mean over rows: n x d -> 1 x d.
Var mean_rows(Var x);
// Half-open range [begin, end) along axis 0 or 1.
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);

// Composites.
Var sub(Var a, Var b);
Var add_scalar(Var x, double c);
// tanh approximation of GELU.
Var gelu(Var x);

// --- optimisation ------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled weight decay.
  double weight_decay = 0.0;
};

// One bias-corrected adaptive-moment step over every parameter.
void optimizer_step(ParameterStore& store, const AdamConfig& cfg);

// max_i |analytic_i - numeric_i| / max(1, |analytic_i|) with central
// differences of step h. `f` must build a scalar on the tape of its input.
double grad_check(const std::function<Var(Var)>& f, const Tensor& point, double h = 1e-5);

// The same measure over parameters of `store`; `loss` builds the scalar on
// the given tape. At most `max_coords` coordinates per parameter are probed
// (0 = all).
double grad_check_params(ParameterStore& store, const std::function<Var(Tape&)>& loss,
                         double h = 1e-5, std::size_t max_coords = 0);

}  // namespace confusio::ad

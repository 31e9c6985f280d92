#include "confusio/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

#include "confusio/error.hpp"

namespace confusio::ad {

namespace {

std::string shapes(std::initializer_list<const Tensor*> ts) {
  std::string out;
  for (const auto* t : ts) {
    if (!out.empty()) out += " and ";
    out += t->shape_string();
  }
  return out;
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + t.shape_string());
}

}  // namespace

// --- Tensor -------------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  const auto n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  const auto n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (n != data_.size())
    throw ShapeError("tensor: shape " + shape_string() + " needs " + std::to_string(n) +
                     " values, got " + std::to_string(data_.size()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor of shape " + shape_string() + " is not rank 2");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor of shape " + shape_string() + " is not rank 2");
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item(): tensor of shape " + shape_string() + " is not a scalar");
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

// --- ParameterStore -------------------------------------------------------------

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
  if (params_.contains(name)) throw Error("parameter '" + name + "' already exists");
  if (!init.all_finite()) throw ValidationError("parameter '" + name + "' has non-finite values");
  Parameter p;
  p.grad = Tensor(init.shape());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) std::fill(p.grad.values().begin(), p.grad.values().end(), 0.0);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

// --- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape->value(id); }

Tape::Tape(ParameterStore* params, bool record) : params_(params), record_(record) {
  nodes_.reserve(256);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(const std::string& name) {
  if (!params_) throw Error("tape has no parameter store (requested '" + name + "')");
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {this, it->second};
  Parameter& p = params_->at(name);
  Node n;
  n.external = &p.value;
  n.param_grad = &p.grad;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor* Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return &n.grad;
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, Backward fn) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::push(Tensor value, std::span<const Var> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (record_)
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [&](const Var& p) { return nodes_[p.id].requires_grad; });
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + lv.shape_string());
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param_grad) {
      auto dst = n.param_grad->values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// --- primitives ---------------------------------------------------------------

Var matmul(Var a, Var b, bool transpose_b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  const std::size_t n = av.rows(), k = av.cols();
  const std::size_t bk = transpose_b ? bv.cols() : bv.rows();
  const std::size_t m = transpose_b ? bv.rows() : bv.cols();
  if (k != bk)
    throw ShapeError(std::string("matmul") + (transpose_b ? " (b transposed)" : "") + ": shapes " +
                     shapes({&av, &bv}) + " are incompatible");
  Tensor out({n, m});
  const double* A = av.data();
  const double* B = bv.data();
  double* C = out.data();
  if (!transpose_b) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = B + p * m;
        double* crow = C + i * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double* arow = A + i * k;
        const double* brow = B + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        C[i * m + j] = s;
      }
  }
  return t.push(std::move(out), {a, b}, [a, b, n, k, m, transpose_b](Tape& t, std::size_t self) {
    const double* G = t.upstream(self).data();
    const double* A = t.value(a).data();
    const double* B = t.value(b).data();
    if (Tensor* ga = t.grad_slot(a.id)) {
      double* GA = ga->data();
      if (!transpose_b) {
        // dA = G B^T
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double* grow = G + i * m;
            const double* brow = B + p * m;
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
            GA[i * k + p] += s;
          }
      } else {
        // dA = G B
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double g = G[i * m + j];
            if (g == 0.0) continue;
            const double* brow = B + j * k;
            double* garow = GA + i * k;
            for (std::size_t p = 0; p < k; ++p) garow[p] += g * brow[p];
          }
      }
    }
    if (Tensor* gb = t.grad_slot(b.id)) {
      double* GB = gb->data();
      if (!transpose_b) {
        // dB = A^T G
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* grow = G + i * m;
            double* gbrow = GB + p * m;
            for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
          }
      } else {
        // dB = G^T A
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double g = G[i * m + j];
            if (g == 0.0) continue;
            const double* arow = A + i * k;
            double* gbrow = GB + j * k;
            for (std::size_t p = 0; p < k; ++p) gbrow[p] += g * arow[p];
          }
      }
    }
  });
}

namespace {

// Shared shape logic for elementwise binary ops with scalar broadcasting.
const Tensor& broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a;
  if (b.size() == 1) return a;
  if (a.size() == 1) return b;
  throw ShapeError(std::string(op) + ": shapes " + shapes({&a, &b}) +
                   " differ and neither is a scalar");
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const Tensor& like = broadcast_shape("add", av, bv);
  Tensor out(like.shape());
  const bool as = av.size() == 1 && like.size() != 1 ? true : false;
  const bool bs = bv.size() == 1 && like.size() != 1 ? true : false;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[as ? 0 : i] + bv[bs ? 0 : i];
  return t.push(std::move(out), {a, b}, [a, b, as, bs](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* ga = t.grad_slot(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[as ? 0 : i] += g[i];
    if (Tensor* gb = t.grad_slot(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[bs ? 0 : i] += g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const Tensor& like = broadcast_shape("mul", av, bv);
  Tensor out(like.shape());
  const bool as = av.size() == 1 && like.size() != 1;
  const bool bs = bv.size() == 1 && like.size() != 1;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[as ? 0 : i] * bv[bs ? 0 : i];
  return t.push(std::move(out), {a, b}, [a, b, as, bs](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (Tensor* ga = t.grad_slot(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[as ? 0 : i] += g[i] * bv[bs ? 0 : i];
    if (Tensor* gb = t.grad_slot(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[bs ? 0 : i] += g[i] * av[as ? 0 : i];
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return t.push(std::move(out), {a}, [a, c](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* ga = t.grad_slot(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * c;
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  Tape& t = *parts.front().tape;
  std::vector<std::size_t> extents;
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = t.value(parts[i]);
    require_rank2("concat", v);
    const Tensor& first = t.value(parts.front());
    if (axis == 0 ? v.cols() != first.cols() : v.rows() != first.rows())
      throw ShapeError("concat: shapes " + shapes({&first, &v}) + " do not align on axis " +
                       std::to_string(axis));
    extents.push_back(axis == 0 ? v.rows() : v.cols());
  }
  if (axis == 0) {
    cols = t.value(parts.front()).cols();
    for (auto e : extents) rows += e;
  } else {
    rows = t.value(parts.front()).rows();
    for (auto e : extents) cols += e;
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = t.value(parts[i]);
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c)
        (axis == 0 ? out.at(offset + r, c) : out.at(r, offset + c)) = v.at(r, c);
    offset += extents[i];
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [ps, axis, extents](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (Tensor* gp = t.grad_slot(ps[i].id)) {
        for (std::size_t r = 0; r < gp->rows(); ++r)
          for (std::size_t c = 0; c < gp->cols(); ++c)
            gp->at(r, c) += axis == 0 ? g.at(offset + r, c) : g.at(r, offset + c);
      }
      offset += extents[i];
    }
  });
}

Var tanh(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  return t.push(std::move(out), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    if (Tensor* gx = t.grad_slot(x.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  require_rank2("softmax", xv);
  const std::size_t n = xv.rows(), d = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double mx = xv.at(r, 0);
    for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, xv.at(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < d; ++c) z += (out.at(r, c) = std::exp(xv.at(r, c) - mx));
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) /= z;
  }
  return t.push(std::move(out), {x}, [x, n, d](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    if (Tensor* gx = t.grad_slot(x.id))
      for (std::size_t r = 0; r < n; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += g.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < d; ++c) gx->at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
      }
  });
}

Var log(Var x, double eps) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(xv[i], eps));
  return t.push(std::move(out), {x}, [x, eps](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& xv = t.value(x);
    if (Tensor* gx = t.grad_slot(x.id))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xv[i] > eps) (*gx)[i] += g[i] / xv[i];
  });
}

Var embedding(Var table, std::span<const std::size_t> indices) {
  Tape& t = *table.tape;
  const Tensor& tv = t.value(table);
  require_rank2("embedding", tv);
  const std::size_t d = tv.cols();
  Tensor out({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= tv.rows())
      throw ShapeError("embedding: index " + std::to_string(indices[r]) + " out of range for table " +
                       tv.shape_string());
    std::copy_n(tv.data() + indices[r] * d, d, out.data() + r * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return t.push(std::move(out), {table}, [table, idx = std::move(idx), d](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* gt = t.grad_slot(table.id))
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) gt->at(idx[r], c) += g.at(r, c);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gamma);
  const Tensor& bv = t.value(beta);
  require_rank2("layer_norm", xv);
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gv.size() != d || bv.size() != d)
    throw ShapeError("layer_norm: input " + xv.shape_string() + " with gain " + gv.shape_string() +
                     " and bias " + bv.shape_string());
  Tensor out(xv.shape());
  // Normalised input and 1/std per row, reused by the backward pass.
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto rstd = std::make_shared<std::vector<double>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xv.at(r, c);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv.at(r, c) - mu) * (xv.at(r, c) - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xv.at(r, c) - mu) * rs;
      xhat->at(r, c) = h;
      out.at(r, c) = gv[c] * h + bv[c];
    }
  }
  return t.push(std::move(out), {x, gamma, beta},
                [x, gamma, beta, n, d, xhat, rstd](Tape& t, std::size_t self) {
                  const Tensor& g = t.upstream(self);
                  const Tensor& gv = t.value(gamma);
                  if (Tensor* gb = t.grad_slot(beta.id))
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < d; ++c) (*gb)[c] += g.at(r, c);
                  if (Tensor* gg = t.grad_slot(gamma.id))
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < d; ++c) (*gg)[c] += g.at(r, c) * xhat->at(r, c);
                  if (Tensor* gx = t.grad_slot(x.id)) {
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t r = 0; r < n; ++r) {
                      double mean_dh = 0.0, mean_dh_h = 0.0;
                      for (std::size_t c = 0; c < d; ++c) {
                        const double dh = g.at(r, c) * gv[c];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat->at(r, c);
                      }
                      mean_dh *= inv_d;
                      mean_dh_h *= inv_d;
                      for (std::size_t c = 0; c < d; ++c) {
                        const double dh = g.at(r, c) * gv[c];
                        gx->at(r, c) += (*rstd)[r] * (dh - mean_dh - xhat->at(r, c) * mean_dh_h);
                      }
                    }
                  }
                });
}

Var sum(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.values()) s += v;
  return t.push(Tensor::scalar(s), {x}, [x](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    if (Tensor* gx = t.grad_slot(x.id))
      for (auto& v : gx->values()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var mean_rows(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  require_rank2("mean_rows", xv);
  const std::size_t n = xv.rows(), d = xv.cols();
  if (n == 0) throw ShapeError("mean_rows: no rows");
  Tensor out({1, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += xv.at(r, c);
  for (std::size_t c = 0; c < d; ++c) out[c] /= static_cast<double>(n);
  return t.push(std::move(out), {x}, [x, n, d](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* gx = t.grad_slot(x.id)) {
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gx->at(r, c) += g[c] * inv;
    }
  });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  require_rank2("slice", xv);
  if (axis > 1) throw ShapeError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? xv.rows() : xv.cols();
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + xv.shape_string() + " on axis " + std::to_string(axis));
  const std::size_t rows = axis == 0 ? end - begin : xv.rows();
  const std::size_t cols = axis == 1 ? end - begin : xv.cols();
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out.at(r, c) = axis == 0 ? xv.at(begin + r, c) : xv.at(r, begin + c);
  return t.push(std::move(out), {x}, [x, axis, begin, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* gx = t.grad_slot(x.id))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          (axis == 0 ? gx->at(begin + r, c) : gx->at(r, begin + c)) += g.at(r, c);
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_scalar(Var x, double c) { return add(x, x.tape->constant(Tensor::scalar(c))); }

Var gelu(Var x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  Var cube = mul(mul(x, x), x);
  Var inner = scale(add(x, scale(cube, 0.044715)), k);
  return mul(scale(x, 0.5), add_scalar(tanh(inner), 1.0));
}

// --- optimisation ---------------------------------------------------------------

void optimizer_step(ParameterStore& store, const AdamConfig& cfg) {
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [_, p] : store.items()) {
    if (p.m.empty()) p.m = Tensor(p.value.shape());
    if (p.v.empty()) p.v = Tensor(p.value.shape());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / c1;
      const double vhat = p.v[i] / c2;
      p.value[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p.value[i]);
    }
  }
}

double grad_check(const std::function<Var(Var)>& f, const Tensor& point, double h) {
  Tape tape;
  Var x = tape.leaf(point);
  Var y = f(x);
  if (!y.value().all_finite()) throw ValidationError("grad_check: non-finite function value");
  tape.backward(y);
  Tensor analytic = tape.grad(x).empty() ? Tensor(point.shape()) : tape.grad(x);

  auto eval = [&](const Tensor& p) {
    Tape probe(nullptr, false);
    const double v = f(probe.constant(p)).value().item();
    if (!std::isfinite(v)) throw ValidationError("grad_check: non-finite function value");
    return v;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    Tensor plus = point, minus = point;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
    if (!std::isfinite(analytic[i])) throw ValidationError("grad_check: non-finite gradient");
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

double grad_check_params(ParameterStore& store, const std::function<Var(Tape&)>& loss, double h,
                         std::size_t max_coords) {
  store.zero_grad();
  {
    Tape tape(&store);
    Var l = loss(tape);
    if (!l.value().all_finite()) throw ValidationError("grad_check: non-finite loss");
    tape.backward(l);
  }
  auto eval = [&] {
    Tape probe(&store, false);
    const double v = loss(probe).value().item();
    if (!std::isfinite(v)) throw ValidationError("grad_check: non-finite loss");
    return v;
  };
  double worst = 0.0;
  for (auto& [name, p] : store.items()) {
    const std::size_t n = max_coords ? std::min(max_coords, p.value.size()) : p.value.size();
    // Evenly spaced probes when the parameter has more coordinates than n.
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = n == p.value.size() ? j : j * p.value.size() / n;
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = eval();
      p.value[i] = saved - h;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace confusio::ad

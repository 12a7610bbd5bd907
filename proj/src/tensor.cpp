// SPDX-License-Identifier: Apache-2.0
#include "vkg/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "vkg/errors.hpp"

namespace vkg {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::optional<OpKind> op;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

namespace {

thread_local bool g_grad_enabled = true;

std::size_t rows_of(const Shape& s) {
  if (s.size() <= 1) return 1;
  return s[0];
}

std::size_t cols_of(const Shape& s) {
  if (s.empty()) return 1;
  if (s.size() == 1) return s[0];
  return s[1];
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

void require_2d(const char* op, const Tensor& t) {
  if (t.rank() != 2) shape_fail(op, t.shape(), "is not 2-D");
}

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

// Builds an op result; the closure is kept only when a gradient can flow.
Tensor make_result(OpKind op, Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backward_fn) {
  auto n = new_node(std::move(shape), std::move(value));
  n->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    n->requires_grad = true;
    n->op = op;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

double erf_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double erf_gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::softmax_lastdim: return "softmax_lastdim";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::gelu: return "gelu";
    case OpKind::embedding_lookup: return "embedding_lookup";
    case OpKind::concat_rows: return "concat_rows";
    case OpKind::slice_rows: return "slice_rows";
    case OpKind::cross_entropy_masked: return "cross_entropy_masked";
    case OpKind::transpose_2d: return "transpose_2d";
    case OpKind::reshape: return "reshape";
    case OpKind::causal_masked_fill: return "causal_masked_fill";
  }
  return "?";
}

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return rows_of(node_->shape); }
std::size_t Tensor::cols() const { return cols_of(node_->shape); }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw NonScalarLoss("item(): tensor " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw ShapeError("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}
bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() { node_->grad.clear(); }
bool Tensor::has_op() const { return node_->op.has_value(); }
OpKind Tensor::op() const { return *node_->op; }

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->value)); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------- ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_fail("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  if (m && n && k) {
    MapMat(out.data(), m, n).noalias() =
        ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
  }
  return make_result(OpKind::matmul, {m, n}, std::move(out), {a.handle(), b.handle()},
                     [m, k, n](Node& self) {
                       if (!m || !n || !k) return;
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       ConstMapMat g(self.grad.data(), m, n);
                       if (pa.requires_grad) {
                         MapMat(pa.ensure_grad().data(), m, k).noalias() +=
                             g * ConstMapMat(pb.value.data(), k, n).transpose();
                       }
                       if (pb.requires_grad) {
                         MapMat(pb.ensure_grad().data(), k, n).noalias() +=
                             ConstMapMat(pa.value.data(), m, k).transpose() * g;
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool bias = !same && a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1];
  if (!same && !bias) shape_fail("add", a.shape(), b.shape());
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bv = b.data();
  const std::size_t cols = bias ? b.numel() : out.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[same ? i : i % cols];
  return make_result(OpKind::add, a.shape(), std::move(out), {a.handle(), b.handle()},
                     [bias, cols](Node& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           g[bias ? i % cols : i] += self.grad[i];
                         }
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(OpKind::mul, a.shape(), std::move(out), {a.handle(), b.handle()},
                     [](Node& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result(OpKind::scale, a.shape(), std::move(out), {a.handle()}, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor softmax_lastdim(const Tensor& a) {
  if (a.numel() == 0) return make_result(OpKind::softmax_lastdim, a.shape(), {}, {a.handle()}, [](Node&) {});
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = in.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= sum;
  }
  return make_result(OpKind::softmax_lastdim, a.shape(), std::move(out), {a.handle()},
                     [r, c](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* y = self.value.data() + i * c;
                         const double* dy = self.grad.data() + i * c;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j) dot += y[j] * dy[j];
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (dy[j] - dot);
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.numel() != c || bias.numel() != c || gain.rank() != 1 || bias.rank() != 1) {
    shape_fail("layer_norm", x.shape(), gain.shape());
  }
  std::vector<double> out(x.numel());
  // Normalized values and per-row inverse std, reused by backward.
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(r);
  const auto in = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = in.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xi[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xi[j] - mean) * is;
      xhat[i * c + j] = h;
      out[i * c + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(
      OpKind::layer_norm, x.shape(), std::move(out), {x.handle(), gain.handle(), bias.handle()},
      [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& dy = self.grad;
        if (pg.requires_grad) {
          auto& g = pg.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += dy[i * c + j] * xhat[i * c + j];
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += dy[i * c + j];
        }
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = dy[i * c + j] * pg.value[j];
              mean_d += d;
              mean_dx += d * xhat[i * c + j];
            }
            mean_d *= inv_c;
            mean_dx *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = dy[i * c + j] * pg.value[j];
              g[i * c + j] += inv_std[i] * (d - mean_d - xhat[i * c + j] * mean_dx);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = erf_gelu(a.data()[i]);
  return make_result(OpKind::gelu, a.shape(), std::move(out), {a.handle()}, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * erf_gelu_grad(p.value[i]);
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids) {
  require_2d("embedding_lookup", table);
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    if (idx[t] < 0 || static_cast<std::size_t>(idx[t]) >= vocab) {
      shape_fail("embedding_lookup", table.shape(), "has no row " + std::to_string(idx[t]));
    }
    std::copy_n(table.data().data() + static_cast<std::size_t>(idx[t]) * d, d, out.data() + t * d);
  }
  const std::size_t n = idx.size();
  return make_result(OpKind::embedding_lookup, {n, d}, std::move(out), {table.handle()},
                     [d, idx = std::move(idx)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t t = 0; t < idx.size(); ++t) {
                         double* row = g.data() + static_cast<std::size_t>(idx[t]) * d;
                         for (std::size_t j = 0; j < d; ++j) row[j] += self.grad[t * d + j];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d("concat_rows", p);
    if (p.cols() != c) shape_fail("concat_rows", parts[0].shape(), p.shape());
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * c);
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    parents.push_back(p.handle());
  }
  return make_result(OpKind::concat_rows, {total, c}, std::move(out), std::move(parents),
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         auto& g = p.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[k] + i];
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d("slice_rows", a);
  if (begin > end || end > a.rows()) {
    shape_fail("slice_rows", a.shape(),
               "cannot be sliced to rows [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  const std::size_t c = a.cols();
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                          a.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_result(OpKind::slice_rows, {end - begin, c}, std::move(out), {a.handle()},
                     [begin, c](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
                     });
}

Tensor cross_entropy_masked(const Tensor& logits, std::span<const std::int32_t> labels,
                            std::span<const std::uint8_t> mask) {
  require_2d("cross_entropy_masked", logits);
  const std::size_t r = logits.rows(), c = logits.cols();
  if (labels.size() != r || mask.size() != r) {
    shape_fail("cross_entropy_masked", logits.shape(),
               "needs " + std::to_string(r) + " labels and mask entries, got " +
                   std::to_string(labels.size()) + " and " + std::to_string(mask.size()));
  }
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw EmptyMask("cross_entropy_masked: loss mask selects no positions");
  // Softmax rows for the selected positions, kept for backward.
  std::vector<double> probs(r * c, 0.0);
  double total = 0.0;
  const auto x = logits.data();
  for (std::size_t i = 0; i < r; ++i) {
    if (!mask[i]) continue;
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      shape_fail("cross_entropy_masked", logits.shape(), "has no class " + std::to_string(labels[i]));
    }
    const double* xi = x.data() + i * c;
    const double mx = *std::max_element(xi, xi + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (probs[i * c + j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= sum;
    total += -(xi[labels[i]] - mx - std::log(sum));
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<std::int32_t> lab(labels.begin(), labels.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return make_result(OpKind::cross_entropy_masked, {}, {total * inv}, {logits.handle()},
                     [r, c, inv, probs = std::move(probs), lab = std::move(lab),
                      msk = std::move(msk)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const double up = self.grad[0] * inv;
                       for (std::size_t i = 0; i < r; ++i) {
                         if (!msk[i]) continue;
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += up * probs[i * c + j];
                         g[i * c + static_cast<std::size_t>(lab[i])] -= up;
                       }
                     });
}

Tensor transpose_2d(const Tensor& a) {
  require_2d("transpose_2d", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  return make_result(OpKind::transpose_2d, {c, r}, std::move(out), {a.handle()}, [r, c](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(OpKind::reshape, std::move(shape), std::move(out), {a.handle()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor causal_masked_fill(const Tensor& a) {
  require_2d("causal_masked_fill", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < c; ++j) out[i * c + j] = kNegInf;
  return make_result(OpKind::causal_masked_fill, a.shape(), std::move(out), {a.handle()},
                     [r, c](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j <= i && j < c; ++j) g[i * c + j] += self.grad[i * c + j];
                     });
}

Tensor sum_all(const Tensor& a) {
  const std::size_t n = a.numel();
  Tensor flat = reshape(a, {1, n});
  Tensor ones = Tensor::full({n, 1}, 1.0);
  return reshape(matmul(flat, ones), {});
}

Tensor apply(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(op_name(op)) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
    }
  };
  switch (op) {
    case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::mul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::scale: need(1); return scale(inputs[0], attrs.scalar);
    case OpKind::softmax_lastdim: need(1); return softmax_lastdim(inputs[0]);
    case OpKind::layer_norm: need(3); return layer_norm(inputs[0], inputs[1], inputs[2], attrs.eps);
    case OpKind::gelu: need(1); return gelu(inputs[0]);
    case OpKind::embedding_lookup: need(1); return embedding_lookup(inputs[0], attrs.ids);
    case OpKind::concat_rows: return concat_rows(inputs);
    case OpKind::slice_rows: need(1); return slice_rows(inputs[0], attrs.begin, attrs.end);
    case OpKind::cross_entropy_masked:
      need(1);
      return cross_entropy_masked(inputs[0], attrs.ids, attrs.mask);
    case OpKind::transpose_2d: need(1); return transpose_2d(inputs[0]);
    case OpKind::reshape: need(1); return reshape(inputs[0], attrs.shape);
    case OpKind::causal_masked_fill: need(1); return causal_masked_fill(inputs[0]);
  }
  throw ShapeError("apply: unknown op");
}

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw NonScalarLoss("backward: loss must have exactly one element, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !p->leaf && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
  for (Node* n : order) {
    n->backward_fn = nullptr;
    n->parents.clear();
    n->op.reset();
  }
}

}  // namespace vkg

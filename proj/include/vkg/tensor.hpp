// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with tape-free reverse-mode autodiff.
//
// Every op result keeps shared references to its parents plus a backward
// closure, so the computation graph is the set of nodes reachable from the
// loss. backward() walks it in reverse topological order and then drops the
// closures, which frees the graph. Leaves (parameters) keep their gradients
// and accumulate across backward() calls until zero_grad().
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vkg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class OpKind {
  matmul,
  add,
  mul,
  scale,
  softmax_lastdim,
  layer_norm,
  gelu,
  embedding_lookup,
  concat_rows,
  slice_rows,
  cross_entropy_masked,
  transpose_2d,
  reshape,
  causal_masked_fill,
};

inline constexpr OpKind kAllOpKinds[] = {
    OpKind::matmul,          OpKind::add,
    OpKind::mul,             OpKind::scale,
    OpKind::softmax_lastdim, OpKind::layer_norm,
    OpKind::gelu,            OpKind::embedding_lookup,
    OpKind::concat_rows,     OpKind::slice_rows,
    OpKind::cross_entropy_masked, OpKind::transpose_2d,
    OpKind::reshape,         OpKind::causal_masked_fill,
};

const char* op_name(OpKind op);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  // Trainable leaf: requires_grad is set.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  // 2-D accessors; a 1-D tensor is viewed as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Provenance of a non-leaf; empty for leaves and after backward().
  bool has_op() const;
  OpKind op() const;

  // Fresh leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Attributes for the generic apply() dispatcher. Each op reads only the
// fields it needs.
struct OpAttrs {
  double scalar = 1.0;          // scale
  double eps = 1e-5;            // layer_norm
  std::size_t begin = 0;        // slice_rows
  std::size_t end = 0;          // slice_rows
  Shape shape;                  // reshape
  std::vector<std::int32_t> ids;  // embedding_lookup ids, cross_entropy labels
  std::vector<std::uint8_t> mask; // cross_entropy_masked
};

Tensor apply(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise sum; b may also be a length-cols vector added to every row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor softmax_lastdim(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Exact erf form.
Tensor gelu(const Tensor& a);
Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
// Mean over masked rows of -log softmax(logits)[label]. Throws EmptyMask
// when no row is selected.
Tensor cross_entropy_masked(const Tensor& logits, std::span<const std::int32_t> labels,
                            std::span<const std::uint8_t> mask);
Tensor transpose_2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Sets entries above the diagonal (col > row) to -inf.
Tensor causal_masked_fill(const Tensor& a);

// Composite helpers built from the primitive ops.
Tensor sum_all(const Tensor& a);

// Populates gradients of every reachable tensor that requires grad, then
// frees the graph. Throws NonScalarLoss unless loss has one element.
void backward(const Tensor& loss);

}  // namespace vkg

#pragma once

// Reverse-mode differentiation over dense matrices.
//
// Graphs are built eagerly: every op computes its value on construction and
// records its parents. Vector-Jacobian products are themselves expressed as
// graph ops, so a gradient returned by input_gradient() is an ordinary Var
// that can be differentiated again. That is what the critic's gradient
// penalty needs: the penalty is a function of dD/dx, and its gradient with
// respect to the critic weights is a second-order quantity.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cyclegzsl/matrix.hpp"

namespace cyclegzsl::ad {

enum class OpKind {
  leaf,
  matmul,
  transpose,
  add_bias,       // B×n + 1×n, bias broadcast over rows
  leaky_relu,
  relu,
  sigmoid,
  exp,
  safe_reciprocal, // 1/x, with 0 where x == 0
  add,
  sub,
  mul,
  scale,
  row_sq_norm,    // B×n -> B×1
  row_norm,       // B×n -> B×1
  row_sum,        // B×n -> B×1
  sum_rows,       // B×n -> 1×n
  mean_rows,      // B×n -> 1×n
  broadcast_rows, // 1×n -> B×n
  broadcast_cols, // B×1 -> B×n
  log_sum_exp,    // B×n -> B×1
  concat_cols,
  slice_cols,
  pad_cols,       // inverse of slice_cols: embeds into zeros
  elementwise,    // user function; first-order only
};

const char *op_name(OpKind op) noexcept;

/// Value and derivative of a scalar function, for OpKind::elementwise.
struct ElementwiseFn {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
};

struct Node {
  Matrix value;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<Node>> parents;
  double scalar = 0.0;   // slope for leaky_relu, factor for scale
  std::size_t offset = 0; // slice/pad column offset
  std::size_t extent = 0; // broadcast count, pad total width
  std::shared_ptr<const ElementwiseFn> fn;
  std::string name;
  /// Filled by backward(); same shape as value.
  Matrix grad;
};

/// Handle to a graph node. Copies share the node.
class Var {
public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix &value() const { return node_->value; }
  const Matrix &grad() const { return node_->grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  OpKind op() const { return node_->op; }
  const std::string &name() const { return node_->name; }
  /// Value of a 1×1 node.
  double scalar() const;

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  Node *get() const noexcept { return node_.get(); }
  const std::shared_ptr<Node> &node() const noexcept { return node_; }

private:
  std::shared_ptr<Node> node_;
};

/// Input, parameter, or constant. Which of these a leaf is depends only on
/// whether gradients are requested for it.
Var leaf(Matrix value, std::string name = {});

Var matmul(const Var &a, const Var &b);
Var transpose(const Var &a);
Var add_bias(const Var &x, const Var &bias);
Var leaky_relu(const Var &x, double negative_slope);
Var relu(const Var &x);
Var sigmoid(const Var &x);
Var exp(const Var &x);
Var safe_reciprocal(const Var &x);
Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var mul(const Var &a, const Var &b);
Var scale(const Var &x, double factor);
Var row_sq_norm(const Var &x);
Var row_norm(const Var &x);
Var row_sum(const Var &x);
Var sum_rows(const Var &x);
Var mean_rows(const Var &x);
Var broadcast_rows(const Var &x, std::size_t rows);
Var broadcast_cols(const Var &x, std::size_t cols);
Var log_sum_exp(const Var &x);
Var concat_cols(const Var &left, const Var &right);
Var slice_cols(const Var &x, std::size_t begin, std::size_t count);
Var pad_cols(const Var &x, std::size_t begin, std::size_t total);
Var elementwise(const Var &x, std::shared_ptr<const ElementwiseFn> fn);

/// Mean of every entry, as a 1×1 node.
Var mean_all(const Var &x);
/// Sum of every entry, as a 1×1 node.
Var sum_all(const Var &x);

/// Gradients of `root` with respect to each node in `wrt`, as graph nodes.
/// `seed` is the upstream gradient and must match root's shape. With
/// `higher_order`, every op on the differentiated path must support
/// differentiating its own vector-Jacobian product, otherwise CapabilityError.
/// Nodes in `wrt` that root does not depend on get a zero leaf.
std::vector<Var> gradients(const Var &root, std::span<const Var> wrt, const Var &seed,
                           bool higher_order);

/// dRoot/dp for each p in `wrt`. Root must be 1×1. Also stores each result in
/// the node's grad accumulator.
std::vector<Matrix> backward(const Var &root, std::span<const Var> wrt);

/// Per-row gradient of a B×1 `root` with respect to the B×n `input`, as a
/// differentiable node. Rows of root must depend only on the same row of
/// input (true of any MLP applied sample-wise).
Var input_gradient(const Var &root, const Var &input);

} // namespace cyclegzsl::ad

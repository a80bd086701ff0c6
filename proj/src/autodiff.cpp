#include "cyclegzsl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl::ad {

namespace {

std::string shape_str(const Matrix &m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(OpKind op, const std::string &detail) {
  throw DimensionError(std::string(op_name(op)) + ": " + detail);
}

Var make(OpKind op, Matrix value, std::vector<std::shared_ptr<Node>> parents) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value = std::move(value);
  node->parents = std::move(parents);
  return Var(std::move(node));
}

void require_node(const Var &v, OpKind op) {
  if (!v) throw ContractError(std::string(op_name(op)) + ": null operand");
}

template <typename F>
Matrix map_values(const Matrix &m, F f) {
  Matrix out(m.rows(), m.cols());
  auto src = m.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Matrix zip_values(const Matrix &a, const Matrix &b, F f) {
  Matrix out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Var binary(OpKind op, const Var &a, const Var &b) {
  require_node(a, op);
  require_node(b, op);
  if (!a.value().same_shape(b.value()))
    shape_error(op, "shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
  Matrix v;
  switch (op) {
  case OpKind::add: v = zip_values(a.value(), b.value(), [](double x, double y) { return x + y; }); break;
  case OpKind::sub: v = zip_values(a.value(), b.value(), [](double x, double y) { return x - y; }); break;
  case OpKind::mul: v = zip_values(a.value(), b.value(), [](double x, double y) { return x * y; }); break;
  default: throw ContractError("binary: unexpected op");
  }
  return make(op, std::move(v), {a.node(), b.node()});
}

Matrix relu_mask(const Matrix &pre, double negative_slope) {
  // Subgradient at exactly 0 takes the negative-side slope.
  return map_values(pre, [negative_slope](double x) { return x > 0.0 ? 1.0 : negative_slope; });
}

// Vector-Jacobian product of `out` for upstream gradient `g`, one entry per
// parent (null when the parent receives no gradient).
std::vector<Var> vjp(const Var &out, const Var &g) {
  Node &n = *out.get();
  const auto parent = [&n](std::size_t i) { return Var(n.parents[i]); };
  switch (n.op) {
  case OpKind::leaf:
    return {};
  case OpKind::matmul:
    return {matmul(g, transpose(parent(1))), matmul(transpose(parent(0)), g)};
  case OpKind::transpose:
    return {transpose(g)};
  case OpKind::add_bias:
    return {g, sum_rows(g)};
  case OpKind::leaky_relu:
    return {mul(g, leaf(relu_mask(parent(0).value(), n.scalar)))};
  case OpKind::relu:
    return {mul(g, leaf(relu_mask(parent(0).value(), 0.0)))};
  case OpKind::sigmoid:
    return {mul(g, sub(out, mul(out, out)))};
  case OpKind::exp:
    return {mul(g, out)};
  case OpKind::safe_reciprocal:
    return {scale(mul(g, mul(out, out)), -1.0)};
  case OpKind::add:
    return {g, g};
  case OpKind::sub:
    return {g, scale(g, -1.0)};
  case OpKind::mul:
    return {mul(g, parent(1)), mul(g, parent(0))};
  case OpKind::scale:
    return {scale(g, n.scalar)};
  case OpKind::row_sq_norm: {
    const Var x = parent(0);
    return {scale(mul(x, broadcast_cols(g, x.cols())), 2.0)};
  }
  case OpKind::row_norm: {
    const Var x = parent(0);
    return {mul(x, broadcast_cols(mul(g, safe_reciprocal(out)), x.cols()))};
  }
  case OpKind::row_sum:
    return {broadcast_cols(g, parent(0).cols())};
  case OpKind::sum_rows:
    return {broadcast_rows(g, parent(0).rows())};
  case OpKind::mean_rows: {
    const std::size_t rows = parent(0).rows();
    return {scale(broadcast_rows(g, rows), 1.0 / static_cast<double>(rows))};
  }
  case OpKind::broadcast_rows:
    return {sum_rows(g)};
  case OpKind::broadcast_cols:
    return {row_sum(g)};
  case OpKind::log_sum_exp: {
    const Var x = parent(0);
    const Var softmax = exp(sub(x, broadcast_cols(out, x.cols())));
    return {mul(broadcast_cols(g, x.cols()), softmax)};
  }
  case OpKind::concat_cols: {
    const std::size_t left = parent(0).cols();
    return {slice_cols(g, 0, left), slice_cols(g, left, parent(1).cols())};
  }
  case OpKind::slice_cols:
    return {pad_cols(g, n.offset, parent(0).cols())};
  case OpKind::pad_cols:
    return {slice_cols(g, n.offset, parent(0).cols())};
  case OpKind::elementwise: {
    const auto &fn = *n.fn;
    return {mul(g, leaf(map_values(parent(0).value(), fn.df)))};
  }
  }
  throw ContractError("vjp: unknown op");
}

bool supports_higher_order(OpKind op) noexcept { return op != OpKind::elementwise; }

// Post-order over the graph reachable from root; parents precede children.
std::vector<std::shared_ptr<Node>> topological_order(const std::shared_ptr<Node> &root) {
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node *> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      std::shared_ptr<Node> p = node->parents[next++];
      if (visited.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }
  return order;
}

} // namespace

const char *op_name(OpKind op) noexcept {
  switch (op) {
  case OpKind::leaf: return "leaf";
  case OpKind::matmul: return "matmul";
  case OpKind::transpose: return "transpose";
  case OpKind::add_bias: return "add_bias";
  case OpKind::leaky_relu: return "leaky_relu";
  case OpKind::relu: return "relu";
  case OpKind::sigmoid: return "sigmoid";
  case OpKind::exp: return "exp";
  case OpKind::safe_reciprocal: return "safe_reciprocal";
  case OpKind::add: return "add";
  case OpKind::sub: return "sub";
  case OpKind::mul: return "mul";
  case OpKind::scale: return "scale";
  case OpKind::row_sq_norm: return "row_sq_norm";
  case OpKind::row_norm: return "row_norm";
  case OpKind::row_sum: return "row_sum";
  case OpKind::sum_rows: return "sum_rows";
  case OpKind::mean_rows: return "mean_rows";
  case OpKind::broadcast_rows: return "broadcast_rows";
  case OpKind::broadcast_cols: return "broadcast_cols";
  case OpKind::log_sum_exp: return "log_sum_exp";
  case OpKind::concat_cols: return "concat_cols";
  case OpKind::slice_cols: return "slice_cols";
  case OpKind::pad_cols: return "pad_cols";
  case OpKind::elementwise: return "elementwise";
  }
  return "unknown";
}

double Var::scalar() const {
  if (value().rows() != 1 || value().cols() != 1)
    throw ContractError("Var::scalar: node is " + shape_str(value()) + ", not 1x1");
  return value()(0, 0);
}

Var leaf(Matrix value, std::string name) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->name = std::move(name);
  return Var(std::move(node));
}

Var matmul(const Var &a, const Var &b) {
  require_node(a, OpKind::matmul);
  require_node(b, OpKind::matmul);
  if (a.cols() != b.rows())
    shape_error(OpKind::matmul, "inner dimensions differ " + shape_str(a.value()) + " * " +
                                    shape_str(b.value()));
  return make(OpKind::matmul, cyclegzsl::matmul(a.value(), b.value()), {a.node(), b.node()});
}

Var transpose(const Var &a) {
  require_node(a, OpKind::transpose);
  return make(OpKind::transpose, a.value().transposed(), {a.node()});
}

Var add_bias(const Var &x, const Var &bias) {
  require_node(x, OpKind::add_bias);
  require_node(bias, OpKind::add_bias);
  if (bias.rows() != 1 || bias.cols() != x.cols())
    shape_error(OpKind::add_bias,
                "bias " + shape_str(bias.value()) + " does not fit input " + shape_str(x.value()));
  Matrix v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v(r, c) += bias.value()(0, c);
  return make(OpKind::add_bias, std::move(v), {x.node(), bias.node()});
}

Var leaky_relu(const Var &x, double negative_slope) {
  require_node(x, OpKind::leaky_relu);
  Var out = make(OpKind::leaky_relu,
                 map_values(x.value(),
                            [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; }),
                 {x.node()});
  out.get()->scalar = negative_slope;
  return out;
}

Var relu(const Var &x) {
  require_node(x, OpKind::relu);
  return make(OpKind::relu, map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }),
              {x.node()});
}

Var sigmoid(const Var &x) {
  require_node(x, OpKind::sigmoid);
  return make(OpKind::sigmoid, map_values(x.value(), [](double v) {
                if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                const double e = std::exp(v);
                return e / (1.0 + e);
              }),
              {x.node()});
}

Var exp(const Var &x) {
  require_node(x, OpKind::exp);
  return make(OpKind::exp, map_values(x.value(), [](double v) { return std::exp(v); }),
              {x.node()});
}

Var safe_reciprocal(const Var &x) {
  require_node(x, OpKind::safe_reciprocal);
  return make(OpKind::safe_reciprocal,
              map_values(x.value(), [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; }),
              {x.node()});
}

Var add(const Var &a, const Var &b) { return binary(OpKind::add, a, b); }
Var sub(const Var &a, const Var &b) { return binary(OpKind::sub, a, b); }
Var mul(const Var &a, const Var &b) { return binary(OpKind::mul, a, b); }

Var scale(const Var &x, double factor) {
  require_node(x, OpKind::scale);
  Var out = make(OpKind::scale, map_values(x.value(), [factor](double v) { return factor * v; }),
                 {x.node()});
  out.get()->scalar = factor;
  return out;
}

Var row_sq_norm(const Var &x) {
  require_node(x, OpKind::row_sq_norm);
  Matrix v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double e : x.value().row(r)) s += e * e;
    v(r, 0) = s;
  }
  return make(OpKind::row_sq_norm, std::move(v), {x.node()});
}

Var row_norm(const Var &x) {
  require_node(x, OpKind::row_norm);
  Matrix v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double e : x.value().row(r)) s += e * e;
    v(r, 0) = std::sqrt(s);
  }
  return make(OpKind::row_norm, std::move(v), {x.node()});
}

Var row_sum(const Var &x) {
  require_node(x, OpKind::row_sum);
  Matrix v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double e : x.value().row(r)) s += e;
    v(r, 0) = s;
  }
  return make(OpKind::row_sum, std::move(v), {x.node()});
}

Var sum_rows(const Var &x) {
  require_node(x, OpKind::sum_rows);
  Matrix v(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) v(0, c) += x.value()(r, c);
  return make(OpKind::sum_rows, std::move(v), {x.node()});
}

Var mean_rows(const Var &x) {
  require_node(x, OpKind::mean_rows);
  if (x.rows() == 0) shape_error(OpKind::mean_rows, "empty batch");
  Matrix v(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) v(0, c) += x.value()(r, c);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double &e : v.data()) e *= inv;
  return make(OpKind::mean_rows, std::move(v), {x.node()});
}

Var broadcast_rows(const Var &x, std::size_t rows) {
  require_node(x, OpKind::broadcast_rows);
  if (x.rows() != 1) shape_error(OpKind::broadcast_rows, "expects 1 row, got " + shape_str(x.value()));
  Matrix v(rows, x.cols());
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(x.value().data().begin(), x.value().data().end(), v.row(r).begin());
  Var out = make(OpKind::broadcast_rows, std::move(v), {x.node()});
  out.get()->extent = rows;
  return out;
}

Var broadcast_cols(const Var &x, std::size_t cols) {
  require_node(x, OpKind::broadcast_cols);
  if (x.cols() != 1) shape_error(OpKind::broadcast_cols, "expects 1 column, got " + shape_str(x.value()));
  Matrix v(x.rows(), cols);
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::fill(v.row(r).begin(), v.row(r).end(), x.value()(r, 0));
  Var out = make(OpKind::broadcast_cols, std::move(v), {x.node()});
  out.get()->extent = cols;
  return out;
}

Var log_sum_exp(const Var &x) {
  require_node(x, OpKind::log_sum_exp);
  if (x.cols() == 0) shape_error(OpKind::log_sum_exp, "no columns");
  Matrix v(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double e : row) s += std::exp(e - m);
    v(r, 0) = m + std::log(s);
  }
  return make(OpKind::log_sum_exp, std::move(v), {x.node()});
}

Var concat_cols(const Var &left, const Var &right) {
  require_node(left, OpKind::concat_cols);
  require_node(right, OpKind::concat_cols);
  if (left.rows() != right.rows())
    shape_error(OpKind::concat_cols,
                "row counts differ " + shape_str(left.value()) + " | " + shape_str(right.value()));
  return make(OpKind::concat_cols, hconcat(left.value(), right.value()),
              {left.node(), right.node()});
}

Var slice_cols(const Var &x, std::size_t begin, std::size_t count) {
  require_node(x, OpKind::slice_cols);
  if (begin + count > x.cols())
    shape_error(OpKind::slice_cols, "columns [" + std::to_string(begin) + ", " +
                                        std::to_string(begin + count) + ") exceed " +
                                        shape_str(x.value()));
  Var out = make(OpKind::slice_cols, x.value().slice_cols(begin, count), {x.node()});
  out.get()->offset = begin;
  return out;
}

Var pad_cols(const Var &x, std::size_t begin, std::size_t total) {
  require_node(x, OpKind::pad_cols);
  if (begin + x.cols() > total)
    shape_error(OpKind::pad_cols, "block " + shape_str(x.value()) + " at column " +
                                      std::to_string(begin) + " exceeds width " +
                                      std::to_string(total));
  Matrix v(x.rows(), total);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) v(r, begin + c) = x.value()(r, c);
  Var out = make(OpKind::pad_cols, std::move(v), {x.node()});
  out.get()->offset = begin;
  out.get()->extent = total;
  return out;
}

Var elementwise(const Var &x, std::shared_ptr<const ElementwiseFn> fn) {
  require_node(x, OpKind::elementwise);
  if (!fn || !fn->f || !fn->df) throw ContractError("elementwise: incomplete function");
  Var out = make(OpKind::elementwise, map_values(x.value(), fn->f), {x.node()});
  out.get()->fn = std::move(fn);
  return out;
}

Var mean_all(const Var &x) {
  return scale(row_sum(sum_rows(x)), 1.0 / static_cast<double>(x.value().size()));
}

Var sum_all(const Var &x) { return row_sum(sum_rows(x)); }

std::vector<Var> gradients(const Var &root, std::span<const Var> wrt, const Var &seed,
                           bool higher_order) {
  if (!root) throw ContractError("gradients: null root");
  if (!seed || !seed.value().same_shape(root.value()))
    throw ContractError("gradients: seed shape must match root " + shape_str(root.value()));

  const std::vector<std::shared_ptr<Node>> order = topological_order(root.node());

  std::unordered_set<Node *> targets;
  for (const Var &w : wrt) {
    if (!w) throw ContractError("gradients: null node in wrt");
    targets.insert(w.get());
  }
  // A node is relevant when some target lies on or beneath it.
  std::unordered_set<Node *> relevant;
  for (const auto &n : order) {
    bool r = targets.count(n.get()) > 0;
    for (const auto &p : n->parents) r = r || relevant.count(p.get()) > 0;
    if (r) relevant.insert(n.get());
  }

  std::unordered_map<Node *, Var> grads;
  if (relevant.count(root.get())) grads.emplace(root.get(), seed);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = it->get();
    if (n->op == OpKind::leaf || !relevant.count(n)) continue;
    auto found = grads.find(n);
    if (found == grads.end()) continue;
    if (higher_order && !supports_higher_order(n->op)) {
      throw CapabilityError(std::string("gradients: op '") + op_name(n->op) +
                            "' does not support higher-order differentiation");
    }
    const Var self(*it);
    const std::vector<Var> parent_grads = vjp(self, found->second);
    for (std::size_t i = 0; i < n->parents.size(); ++i) {
      Node *p = n->parents[i].get();
      if (!relevant.count(p) || !parent_grads[i]) continue;
      auto [slot, inserted] = grads.try_emplace(p, parent_grads[i]);
      if (!inserted) slot->second = add(slot->second, parent_grads[i]);
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var &w : wrt) {
    auto found = grads.find(w.get());
    out.push_back(found != grads.end() ? found->second
                                       : leaf(Matrix::zeros(w.rows(), w.cols())));
  }
  return out;
}

std::vector<Matrix> backward(const Var &root, std::span<const Var> wrt) {
  if (!root) throw ContractError("backward: null root");
  if (root.rows() != 1 || root.cols() != 1)
    throw ContractError("backward: root must be scalar (1x1), got " + shape_str(root.value()));
  const std::vector<Var> grads = gradients(root, wrt, leaf(Matrix::ones(1, 1)), false);
  std::vector<Matrix> out;
  out.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    wrt[i].get()->grad = grads[i].value();
    out.push_back(grads[i].value());
  }
  return out;
}

Var input_gradient(const Var &root, const Var &input) {
  if (!root || !input) throw ContractError("input_gradient: null node");
  if (root.cols() != 1 || root.rows() != input.rows())
    throw ContractError("input_gradient: root must be one scalar per input row, got " +
                        shape_str(root.value()) + " for input " + shape_str(input.value()));
  const Var wrt[] = {input};
  return gradients(root, wrt, leaf(Matrix::ones(root.rows(), 1)), true).front();
}

} // namespace cyclegzsl::ad

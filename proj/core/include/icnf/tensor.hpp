#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace icnf {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the define-by-run tape. Values are immutable once an op has
// produced them; only leaves (parameters) are updated in place by optimizers.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty means "no gradient recorded"
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  ~Node();

  std::span<double> ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 tensor with an optional reverse-mode tape entry.
///
/// Copies share storage (handle semantics); use `detach()` for a deep copy
/// that is cut from the graph.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  /// Writable view of a leaf's values. Throws GraphError for op outputs.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  /// Gradient buffer; empty span when no gradient has been recorded.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Drops the gradient buffer, so `has_grad()` is false until the next backward.
  void zero_grad();

  /// Deep copy of the values, detached from any graph.
  Tensor detach(bool requires_grad = false) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode accumulation from a scalar loss into every ancestor that
/// requires grad. The interior of the graph is released afterwards, so a
/// second call on the same loss throws.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace icnf

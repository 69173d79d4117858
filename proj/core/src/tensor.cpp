#include "icnf/tensor.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "icnf/error.hpp"

namespace icnf {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

Node::~Node() {
  // Unwind long chains iteratively; recursive shared_ptr destruction of a
  // T-step recurrent graph can exhaust a thread stack.
  std::vector<std::shared_ptr<Node>> pending = std::move(inputs);
  while (!pending.empty()) {
    std::shared_ptr<Node> node = std::move(pending.back());
    pending.pop_back();
    if (node && node.use_count() == 1) {
      for (auto& in : node->inputs) pending.push_back(std::move(in));
      node->inputs.clear();
      node->backward = nullptr;
    }
  }
}

std::span<double> Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return shape_size(shape()); }

std::span<const double> Tensor::values() const {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw GraphError("use of undefined tensor");
  if (!node_->leaf) {
    throw GraphError(std::string("cannot mutate the output of op '") + node_->op + "'");
  }
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_ || node_->leaf; }
const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw GraphError("use of undefined tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) {
    node_->grad.clear();
  }
}

Tensor Tensor::detach(bool requires_grad) const {
  return Tensor(shape(), node_->value, requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

void backward(const Tensor& loss) {
  using detail::Node;
  const auto& root = loss.node();
  if (!root) throw GraphError("backward: undefined loss tensor");
  if (root->value.size() != 1) {
    throw GraphError("backward: loss must be scalar, got shape " + shape_string(root->shape));
  }
  if (root->released) {
    throw GraphError("backward: graph already consumed by an earlier backward(); "
                     "rebuild the forward pass");
  }
  if (!root->requires_grad) {
    throw GraphError("backward: loss is detached (no input requires grad)");
  }

  // Iterative post-order DFS gives a topological order with inputs first.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->leaf) continue;
    node->ensure_grad();
    if (node->backward) node->backward(*node);
  }

  for (Node* node : order) {
    if (node->leaf) {
      node->ensure_grad();
      continue;
    }
    node->backward = nullptr;
    node->inputs.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->released = true;
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace icnf

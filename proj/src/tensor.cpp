#include "tabkanet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tabkanet {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(Shape shape) {
  auto n = std::make_shared<Node>();
  std::size_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->val.assign(count, 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), v);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) +
                                " does not match " +
                                std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->val = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor t = zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : t.values()) x = dist(rng);
  return t;
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t = zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& x : t.values()) x = dist(rng);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::item: tensor " + shape_str(shape()) +
                                " is not scalar");
  }
  return node_->val[0];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->val.size(), 0.0);
}

namespace detail {

Tensor make_node(Shape shape, std::vector<double> val,
                 std::vector<Tensor> parents,
                 std::function<void(Tensor::Node&)> backprop) {
  Tensor out = Tensor::from(std::move(shape), std::move(val));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Tensor& p : parents) {
    if (p.requires_grad()) {
      any = true;
      break;
    }
  }
  if (!any) return out;
  auto* n = out.raw();
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (Tensor& p : parents) n->parents.push_back(p.node());
  n->backprop = std::move(backprop);
  return out;
}

}  // namespace detail

void backward(const Tensor& root) {
  if (root.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_str(root.shape()));
  }
  // Iterative post-order DFS; order is fixed by graph structure, so leaf
  // gradients do not depend on construction bookkeeping.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  struct Frame {
    Tensor::Node* n;
    std::size_t next_child;
  };
  std::vector<Frame> stack;
  stack.push_back({root.raw(), 0});
  visited.insert(root.raw());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.n->parents.size()) {
      Tensor::Node* child = f.n->parents[f.next_child++].get();
      if (visited.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  root.raw()->ensure_grad();
  root.raw()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    if (n->backprop && n->requires_grad) n->backprop(*n);
  }
}

}  // namespace tabkanet

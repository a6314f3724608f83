#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tabkanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense f64 tensor node participating in a define-by-run autodiff graph.
// Values are row-major. The graph is rebuilt on every forward pass; backward()
// walks it once in reverse topological order.
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // lazily allocated, same length as val
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grad buffers.
    std::function<void(Node&)> backprop;

    std::size_t numel() const { return val.size(); }
    void ensure_grad() {
      if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->val.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t ndim() const { return node_->shape.size(); }

  std::vector<double>& values() { return node_->val; }
  const std::vector<double>& values() const { return node_->val; }
  double item() const;

  Tensor& set_requires_grad(bool rg) {
    node_->requires_grad = rg;
    return *this;
  }
  bool requires_grad() const { return node_->requires_grad; }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<Node> node() const { return node_; }
  Node* raw() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from `root`, which must be scalar.
// Leaf tensors with requires_grad set receive their gradients.
void backward(const Tensor& root);

// While a NoGradGuard is alive on this thread, ops do not record the graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

namespace detail {
// Builds a result node, wiring parents/backprop only when grad recording is on
// and at least one parent requires grad.
Tensor make_node(Shape shape, std::vector<double> val,
                 std::vector<Tensor> parents,
                 std::function<void(Tensor::Node&)> backprop);
}  // namespace detail

}  // namespace tabkanet

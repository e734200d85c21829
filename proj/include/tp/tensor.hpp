#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "tp/error.hpp"

// Reverse-mode tape. Every op appends a node holding its forward value and a
// closure that scatters the node's gradient into its parents. Nodes carry a
// monotone creation id; backward walks reachable nodes in decreasing id,
// which is a valid topological order and makes gradient accumulation
// deterministic (fixed left-to-right within each closure).

namespace tp {

template <class Real>
struct Node {
  std::vector<int> shape;
  std::vector<Real> val;
  std::vector<Real> grad;  // sized lazily by backward()
  bool requires_grad = false;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, writes parents' grad

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> c{1};
    return c.fetch_add(1, std::memory_order_relaxed);
  }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    contract(d > 0, "tensor shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// Ops consult this to decide whether to record backprop closures. Off for
// teacher forwards, coarse render passes and finite-difference re-evals.
inline bool& grad_mode() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
};

template <class Real>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Real>> n) : n_(std::move(n)) {}

  static Var leaf(std::vector<int> shape, std::vector<Real> data,
                  bool requires_grad = false) {
    contract(shape_numel(shape) == data.size(),
             "leaf: element count does not match shape");
    auto n = std::make_shared<Node<Real>>();
    n->shape = std::move(shape);
    n->val = std::move(data);
    n->requires_grad = requires_grad;
    n->id = Node<Real>::next_id();
    return Var(std::move(n));
  }

  static Var param(std::vector<int> shape, std::vector<Real> data) {
    return leaf(std::move(shape), std::move(data), true);
  }

  static Var constant(std::vector<int> shape, std::vector<Real> data) {
    return leaf(std::move(shape), std::move(data), false);
  }

  static Var scalar_const(Real v) { return constant({1}, {v}); }

  static Var zeros(std::vector<int> shape, bool requires_grad = false) {
    std::vector<Real> d(shape_numel(shape), Real(0));
    return leaf(std::move(shape), std::move(d), requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  std::size_t size() const { return n_->val.size(); }
  std::vector<Real>& data() { return n_->val; }
  const std::vector<Real>& data() const { return n_->val; }
  std::vector<Real>& grad() { return n_->grad; }
  const std::vector<Real>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }

  Real item() const {
    contract(n_ && n_->val.size() == 1, "item: tensor is not scalar");
    return n_->val[0];
  }

  // Detached copy (shares nothing with the tape).
  Var detach() const { return constant(n_->shape, n_->val); }

  int rows() const {  // product of all but last dim
    contract(!n_->shape.empty(), "rows: rank 0");
    int r = 1;
    for (std::size_t i = 0; i + 1 < n_->shape.size(); ++i) r *= n_->shape[i];
    return r;
  }
  int cols() const { return n_->shape.back(); }

  std::shared_ptr<Node<Real>> node() const { return n_; }

 private:
  std::shared_ptr<Node<Real>> n_;
};

template <class Real>
Var<Real> make_node(std::vector<int> shape, std::vector<Real> val,
                    std::vector<Var<Real>> parents, const char* op,
                    std::function<void(Node<Real>&)> backprop) {
  contract(shape_numel(shape) == val.size(), std::string(op) + ": bad output size");
  auto n = std::make_shared<Node<Real>>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  n->id = Node<Real>::next_id();
  n->op = op;
  if (grad_mode()) {
    bool needs = false;
    for (const auto& p : parents)
      if (p.defined() && p.requires_grad()) needs = true;
    if (needs) {
      n->requires_grad = true;
      for (const auto& p : parents) n->parents.push_back(p.node());
      n->backprop = std::move(backprop);
    }
  }
  return Var<Real>(std::move(n));
}

// Reverse pass from a scalar loss. Gradients of every reachable
// requires_grad node end up in node->grad; previous grads are discarded.
template <class Real>
void backward(const Var<Real>& loss) {
  contract(loss.defined() && loss.size() == 1, "backward: loss must be scalar");

  std::vector<Node<Real>*> order;
  std::unordered_set<Node<Real>*> seen;
  std::vector<Node<Real>*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node<Real>* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || seen.count(n)) continue;
    seen.insert(n);
    order.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  for (Node<Real>* n : order) n->grad.assign(n->val.size(), Real(0));
  if (!loss.node()->requires_grad) return;  // nothing to differentiate
  loss.node()->grad[0] = Real(1);

  std::sort(order.begin(), order.end(),
            [](const Node<Real>* a, const Node<Real>* b) { return a->id > b->id; });
  for (Node<Real>* n : order) {
    if (!n->backprop) continue;
    for (Real g : n->grad)
      if (!std::isfinite(g))
        throw DiagnosticError(std::string("non-finite gradient at op '") + n->op + "'");
    n->backprop(*n);
  }
}

}  // namespace tp

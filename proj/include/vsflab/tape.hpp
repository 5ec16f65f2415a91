#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "vsflab/tensor.hpp"

namespace vsflab {

// Handle into a Tape; cheap to copy, valid for the tape's lifetime.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Single-owner record of a forward computation. Nodes are appended in
// execution order, so creation order is a topological order; backward() walks
// it once in reverse, accumulating gradients. Gradients only propagate into
// subgraphs that reach a grad-requiring leaf.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& gout)>;

  Var leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad, false});
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  Var record(Tensor value, const std::vector<Var>& parents, Backward fn) {
    bool needs = false;
    for (Var p : parents) needs = needs || needs_grad(p);
    nodes_.push_back(
        Node{std::move(value), Tensor{}, needs ? std::move(fn) : nullptr, needs, false});
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Tensor& val(Var v) const { return at(v).value; }
  bool needs_grad(Var v) const { return at(v).needs; }

  // Gradient sink for `v`; allocates zeros on first touch. Null when the
  // node does not require gradients, which adjoints interpret as "skip".
  Tensor* grad_sink(Var v) {
    Node& n = at(v);
    if (!n.needs) return nullptr;
    if (!n.has_grad) {
      n.grad = Tensor{n.value.shape()};
      n.has_grad = true;
    }
    return &n.grad;
  }

  const Tensor& grad(Var v) const {
    const Node& n = at(v);
    require(n.has_grad, "tape: no gradient accumulated for this node");
    return n.grad;
  }

  bool has_grad(Var v) const { return at(v).has_grad; }

  // Seeds d(loss)/d(loss) = 1 and runs every reachable adjoint exactly once,
  // in reverse creation order. `loss` must hold a single element.
  void backward(Var loss) {
    require(val(loss).size() == 1, "tape: backward needs a scalar loss");
    require(needs_grad(loss), "tape: loss does not depend on any parameter");
    Tensor* seed = grad_sink(loss);
    (*seed)[0] += 1.0;
    for (std::int32_t i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.has_grad && n.fn) n.fn(*this, n.grad);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward fn;
    bool needs = false;
    bool has_grad = false;
  };

  Node& at(Var v) {
    require(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(),
            "tape: invalid handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& at(Var v) const {
    require(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(),
            "tape: invalid handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<Node> nodes_;
};

}  // namespace vsflab

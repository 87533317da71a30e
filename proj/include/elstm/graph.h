#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "elstm/cells.h"
#include "elstm/param_tape.h"
#include "elstm/tensor.h"

namespace elstm::ad {

// Handle to a value recorded on a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape for one forward pass. Operations record their result and
// a backward closure; backward() replays the closures in reverse order and
// accumulates parameter gradients straight into the bound ParamTape entries.
// A Graph is single-owner and used for exactly one backward pass.
class Graph {
 public:
  using Value = Var;

  Graph() { nodes_.reserve(1024); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Non-owning constant. `value` must outlive the graph.
  Var reference(const Tensor& value);
  // Trainable leaf. Reads entry.value in place and accumulates into entry.grad.
  Var param(ParamTape::Entry& entry);
  Var zeros(std::size_t n) { return constant(Tensor(n)); }

  const Tensor& value(Var v) const;
  double scalar(Var v) const { return value(v)[0]; }
  std::size_t size() const { return nodes_.size(); }

  Var matvec(Var w, Var x);
  Var affine(Var w, Var x, Var b);
  // σ(W x + b) and tanh(W x + b) as single nodes.
  Var affine_sigmoid(Var w, Var x, Var b);
  Var affine_tanh(Var w, Var x, Var b);
  // One LSTM or ELSTM step (by w.shape.kind) recorded as a single node with a
  // hand-written backward pass. t is 1-based. The cell templates call this in
  // place of the composite gate expressions.
  cells::CellStateT<Var> fused_lstm_step(const cells::CellWeights<Var>& w,
                                         const cells::CellStateT<Var>& s, Var x,
                                         std::size_t t);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var one_minus(Var x);
  Var concat(Var a, Var b);
  Var column(Var m, std::size_t j);
  Var row(Var m, std::size_t i);
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var scale(Var x, double k);
  // Multiplies vector v by the single-element tensor s.
  Var scale_by(Var v, Var s);
  Var element(Var v, std::size_t i);
  // Packs single-element tensors into one vector.
  Var stack(std::span<const Var> scalars);
  Var softmax(Var x);
  // −log softmax(logits)[label], as a single-element tensor.
  Var softmax_cross_entropy(Var logits, std::size_t label);
  // −log max(p[label], floor). Increments *clamped when the floor is hit.
  Var negative_log(Var probs, std::size_t label, double floor,
                   std::size_t* clamped = nullptr);
  Var sum(std::span<const Var> scalars);

  // Seeds d(root) = seed and propagates to every reachable input.
  void backward(Var root, double seed = 1.0);

 private:
  using Backward = std::function<void(Graph&, std::size_t)>;
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Tensor value, bool needs_grad, Backward backward);
  enum class Activation { Identity, Sigmoid, Tanh };
  Var affine_activation(Var w, Var x, Var b, Activation act);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  const Tensor& val(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  Tensor& grad(std::size_t id);
  const Tensor& grad_of(std::size_t id) { return grad(id); }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace elstm::ad

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adnet/rng.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// Reverse-mode automatic differentiation over a linear tape.
//
// Operations are recorded in execution order, which is a topological order by
// construction. backward() replays the tape once in reverse, accumulating
// gradients per value; gradients of leaf values are added into the referenced
// parameter tensor's grad buffer.
//
// A tape is single-use: record one forward computation, call backward() at
// most once.
template <typename Real>
class TapeT {
 public:
  using Id = std::uint32_t;

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  // Trainable leaf: gradients accumulate into param->grad after backward().
  // The tensor must outlive the tape.
  Id leaf(TensorT<Real>* param);

  // Non-trainable value (network input, targets).
  Id input(TensorT<Real> value);

  const TensorT<Real>& value(Id id) const;

  // Gradient of the last backward() root w.r.t. value `id`; empty span if the
  // value was never reached.
  std::span<const Real> grad(Id id) const;

  // --- primitives -------------------------------------------------------
  // 3x3 convolution, stride 1, zero same-padding.
  Id conv2d(Id x, Id kernels, Id bias);
  // 2x2 max pooling, stride 2, floor semantics, first-occurrence ties.
  Id maxpool2(Id x);
  Id leaky_relu(Id x, Real slope);
  Id fully_connected(Id x, Id weights, Id bias);
  // Inverted dropout: scales survivors by 1/(1-rate); identity in inference.
  Id dropout(Id x, Real rate, bool training, RngStream& rng);
  // [N, ...] -> [N, D]
  Id flatten(Id x);
  Id add(Id a, Id b);
  // Per-channel mix of two [N,C,H,W] maps: alpha_c * a + (1 - alpha_c) * b.
  Id channel_mix(Id a, Id b, Id alpha);
  // Mean over the batch of -log softmax(logits)[label]. Scalar output.
  Id softmax_cross_entropy(Id logits, std::vector<std::size_t> labels);
  // Mean over all elements of the stable binary cross entropy on logits.
  Id sigmoid_binary_cross_entropy(Id logits, TensorT<Real> targets);
  // Scalar combination wa * a + wb * b of two scalar values.
  Id blend(Id a, Id b, Real wa, Real wb);
  // Scalar projection sum_i coeffs[i] * x[i].
  Id inner(Id x, std::vector<Real> coeffs);

  // --- backward ----------------------------------------------------------
  // Runs the reverse sweep from a scalar root. Returns the number of node
  // backward rules invoked (each node exactly once).
  std::size_t backward(Id root);

  // Same, but follows the caller-supplied node ordering, which must be a
  // permutation of all node indices compatible with reverse-topological
  // order. Exists so equivalence of valid traversal orders is testable.
  std::size_t backward_with_order(Id root, std::span<const std::size_t> order);

  struct NodeMeta {
    std::vector<Id> inputs;
    Id output;
  };
  // Recorded operation metadata, in execution order.
  std::vector<NodeMeta> node_metas() const;
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_values() const { return slots_.size(); }

 private:
  struct Slot {
    TensorT<Real> owned;
    TensorT<Real>* external = nullptr;
  };
  struct Node {
    std::vector<Id> inputs;
    Id output;
    std::function<void(TapeT&)> pull;
  };

  Id push_value(TensorT<Real> t);
  std::vector<Real>& grad_buf(Id id);
  const TensorT<Real>& val(Id id) const;
  void run_backward(Id root, std::span<const std::size_t> order);

  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
  std::vector<std::pair<Id, TensorT<Real>*>> leaves_;
  std::vector<std::vector<Real>> grads_;
  bool backward_done_ = false;
};

using Tape = TapeT<double>;

}  // namespace adnet

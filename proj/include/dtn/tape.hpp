#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtn/tensor.hpp"

namespace dtn {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

// Reverse-mode automatic differentiation over Tensor values.
//
// Recording is eager: every call computes the value immediately and appends
// one node. backward() replays the nodes in reverse once, accumulating
// vector-Jacobian products through a switch on the op kind — no per-node
// closures, which keeps a training step at a few hundred nanoseconds per
// node. A tape is built per batch: bind the parameters once, record every
// sample's graph against the same parameter nodes, and the single backward
// pass accumulates the summed gradient.
class Tape {
public:
  enum class Op : std::uint8_t {
    kInput,      // leaf, no tracked gradient consumers care about
    kParam,      // leaf registered in parameter order
    kContract,
    kAdd,
    kSub,
    kMul,        // elementwise
    kDiv,        // elementwise
    kScale,      // by compile-time constant
    kMulScalar,  // by scalar node
    kDivScalar,  // by scalar node
    kSigmoid,
    kAbs,
    kExp,
    kLog,
    kExp2x2,
    kSoftmax,
    kLogSumExp,
    kFrobNorm,
    kSumSquares,
    kReshape,
    kTranspose,
    kPick,
    kStack,
    kSumN,
  };

  NodeId input(Tensor v);
  NodeId constant(double v) { return input(Tensor::scalar(v)); }
  NodeId param(const Tensor& v);

  NodeId contract(NodeId a, NodeId b, std::initializer_list<AxisPair> pairs);
  NodeId contract(NodeId a, NodeId b, std::span<const AxisPair> pairs);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId mul_scalar(NodeId a, NodeId s);
  NodeId div_scalar(NodeId a, NodeId s);
  NodeId sigmoid(NodeId a);
  NodeId abs(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId exp2x2(NodeId h);
  NodeId softmax(NodeId v);
  NodeId log_sum_exp(NodeId v);
  NodeId frobenius_norm(NodeId a);
  NodeId sum_squares(NodeId a);
  NodeId reshape(NodeId a, Shape s);
  NodeId transpose(NodeId a, std::span<const std::uint8_t> perm);
  NodeId pick(NodeId a, std::size_t axis, std::size_t index);
  NodeId stack(std::span<const NodeId> parts);
  NodeId sum_n(std::span<const NodeId> terms);  // same-shape elementwise sum

  const Tensor& val(NodeId id) const { return nodes_[id].value; }
  double scalar_val(NodeId id) const { return nodes_[id].value[0]; }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(root)/d(node) for every node reachable below root. root
  // must hold a single element.
  void backward(NodeId root);

  // Gradient of a node after backward(); a null tensor means the node did
  // not influence the root.
  const Tensor& grad(NodeId id) const { return grads_[id]; }

  std::size_t num_params() const { return params_.size(); }
  NodeId param_node(std::size_t i) const { return params_[i]; }
  // Gradient for the i-th registered parameter; zeros if untouched.
  const Tensor& param_grad(std::size_t i) const;

  // Clears all nodes but keeps buffer capacity for the next batch.
  void reset();

private:
  struct Node {
    Op op;
    std::uint8_t npairs = 0;
    std::array<std::uint8_t, 4> ax{};  // contract: a-axes; transpose: perm
    std::array<std::uint8_t, 4> bx{};  // contract: b-axes; pick: bx[0] = axis
    NodeId in0 = kNoNode, in1 = kNoNode;
    std::uint32_t aux_begin = 0, aux_count = 0;  // stack / sum_n inputs
    std::uint32_t index = 0;                     // pick position
    double c = 0.0;                              // scale constant
    Tensor value;
  };

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }
  Tensor& grad_acc(NodeId id, const Shape& s);
  void backward_contract(const Node& n);

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  std::vector<NodeId> aux_;
  std::vector<Tensor> grads_;
};

}  // namespace dtn

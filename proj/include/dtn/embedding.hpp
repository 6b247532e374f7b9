#pragma once

#include <span>
#include <vector>

#include "dtn/tape.hpp"
#include "dtn/tensor.hpp"

namespace dtn {

// Scalar <-> two-component feature codec. A value x in [0,1] becomes the
// vector (x, 1-x); a two-component output psi is read back as
// |psi_0| / (|psi_0| + |psi_1|), which inverts the embedding exactly and is
// insensitive to the overall scale of psi.

Tensor embed(double x);                                  // throws outside [0,1]
std::vector<Tensor> embed_sequence(std::span<const double> xs);
double decode(const Tensor& psi);  // throws when both components are zero

NodeId embed_node(Tape& tape, double x);
std::vector<NodeId> embed_sequence_nodes(Tape& tape, std::span<const double> xs);
NodeId decode_node(Tape& tape, NodeId psi);

}  // namespace dtn

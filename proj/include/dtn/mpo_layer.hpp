#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtn/rng.hpp"
#include "dtn/tape.hpp"
#include "dtn/tensor.hpp"

namespace dtn {

enum class Activation : std::uint8_t { kLinear = 0, kSigmoid = 1, kMatrixExp = 2 };

struct MpoOptions {
  Activation activation = Activation::kLinear;
  bool residual = false;            // psi_j = phi_j + act(H(j) phi_j)
  bool normalize_output = false;    // psi_j /= ||psi_j||
  bool normalize_contexts = false;  // unit-norm every stored context
};

// Matrix-product-operator layer. Each site j carries a four-index core
// M[a,b,s,t] (bond in, bond out, feature out, feature in); a layer with
// num_sites == 0 is uniform and reuses one core at every site of whatever
// sequence it is applied to. The boundary matrix closes the bond trace.
//
// Applied to features phi(1..N), the layer forms per-site transfer matrices
//   Theta(j)[a,b] = sum_{s,t} phi_s M[a,b,s,t] phi_t,
// accumulates left contexts HL(1) = I, HL(j) = HL(j-1) Theta(j-1) and right
// contexts HR(N) = G, HR(j) = Theta(j+1) HR(j+1), takes the local weight
//   H(j)[s,t] = Tr(HL(j) M^{s,t} HR(j)),
// and outputs psi_j = act(H(j) phi_j) with the optional residual added
// before output normalization. With normalize_contexts set, every stored
// context (the bases included) is divided by its Frobenius norm as it is
// formed, which keeps long products from underflowing or blowing up.
struct MpoLayer {
  std::size_t phys_dim = 2;
  std::size_t bond_dim = 2;
  std::size_t num_sites = 0;  // 0 = uniform
  std::vector<Tensor> cores;  // [D,D,d,d]; one entry when uniform
  Tensor boundary;            // [D,D]
  MpoOptions opts;

  bool uniform() const { return num_sites == 0; }
  const Tensor& core(std::size_t j) const { return cores[uniform() ? 0 : j]; }
  Tensor& core(std::size_t j) { return cores[uniform() ? 0 : j]; }
};

// Near-identity initialization: cores delta_{s,t} delta_{a,b} plus
// Normal(0, noise^2) on every entry, boundary exactly I. At noise = 0 the
// layer's transfer matrices are the identity for any normalized input.
MpoLayer make_mpo_layer(std::size_t phys_dim, std::size_t bond_dim,
                        std::size_t num_sites, MpoOptions opts, double noise,
                        Rng& rng);

// Parameter nodes of one layer on a tape.
struct MpoBinding {
  std::vector<NodeId> cores;
  NodeId boundary = kNoNode;
};
MpoBinding bind_mpo(Tape& tape, const MpoLayer& layer);

// Everything the layer computes for one input sequence, as tape nodes.
// Exposed at this granularity so the intermediate objects can be checked
// against independent dense computations.
struct MpoTrace {
  std::vector<NodeId> theta;   // N transfer matrices
  std::vector<NodeId> left;    // N left contexts
  std::vector<NodeId> right;   // N right contexts
  std::vector<NodeId> local;   // N local weights H(j)
  std::vector<NodeId> output;  // N feature vectors psi_j
};
MpoTrace mpo_apply(Tape& tape, const MpoLayer& layer, const MpoBinding& bind,
                   std::span<const NodeId> phi);

std::vector<NodeId> mpo_forward_nodes(Tape& tape, const MpoLayer& layer,
                                      const MpoBinding& bind,
                                      std::span<const NodeId> phi);

// Plain forward pass with the boundary supplied in factored form
// G = sum_k u_k v_k^T (columns of u_mat and v_mat, both [D, rank]). The
// left/right contexts collapse to rank-many vector chains, so a sweep costs
// O(N d^2 D^2 rank) instead of the O(N D^3) matrix-context recursion.
// Incompatible with normalize_contexts (the contexts are never formed).
std::vector<Tensor> mpo_forward_factored(const MpoLayer& layer,
                                         const Tensor& u_mat,
                                         const Tensor& v_mat,
                                         std::span<const Tensor> phi);

// Flop-scale estimate for the factored sweep above.
double mpo_cost_estimate(std::size_t num_sites, std::size_t phys_dim,
                         std::size_t bond_dim, std::size_t boundary_rank);

}  // namespace dtn

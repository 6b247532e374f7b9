#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtn/rng.hpp"
#include "dtn/tape.hpp"
#include "dtn/tensor.hpp"

namespace dtn {

// Matrix-product-state classification head. Site j carries cores A^s[a,b]
// (one D x D matrix per feature component); the class tensor C sits after
// site floor(N/2) and the boundary matrix closes the trace:
//
//   logit_c = Tr( B T(1) ... T(mid) C^c T(mid+1) ... T(N) ),
//   T(j)    = sum_s phi_s(j) A^s(j).
//
// The left and right partial products are rescaled to unit Frobenius norm at
// every step with the logs of the scales accumulated, and the final logits
// are multiplied back by exp(sum of logs) — the result is algebraically the
// raw trace but stays in floating-point range for hundreds of sites.
struct MpsHead {
  std::size_t num_classes = 2;
  std::size_t phys_dim = 2;
  std::size_t bond_dim = 2;
  std::size_t num_sites = 0;  // 0 = uniform
  std::vector<Tensor> cores;  // [d, D, D]; one entry when uniform
  Tensor class_tensor;        // [C, D, D]
  Tensor boundary;            // [D, D]

  bool uniform() const { return num_sites == 0; }
  const Tensor& core(std::size_t j) const { return cores[uniform() ? 0 : j]; }
};

// Near-identity initialization: every A^s and every class slice is
// I + Normal(0, noise^2), the boundary is exactly I. At noise = 0 every
// class logit equals bond_dim for any valid embedded input, a useful fixed
// point for tests.
MpsHead make_mps_head(std::size_t num_classes, std::size_t phys_dim,
                      std::size_t bond_dim, std::size_t num_sites,
                      double noise, Rng& rng);

struct MpsHeadBinding {
  std::vector<NodeId> cores;
  NodeId class_tensor = kNoNode;
  NodeId boundary = kNoNode;
};
MpsHeadBinding bind_mps_head(Tape& tape, const MpsHead& head);

// Logits for one embedded sequence; returns a rank-1 node of length
// num_classes.
NodeId mps_head_logits(Tape& tape, const MpsHead& head,
                       const MpsHeadBinding& bind, std::span<const NodeId> phi);

}  // namespace dtn

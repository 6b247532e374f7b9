#pragma once

#include <cstddef>
#include <vector>

#include "dtn/mpo_layer.hpp"
#include "dtn/tensor.hpp"

namespace dtn {

// A uniform MPO whose dense operator equals the sum of pair exchanges
// sum_{i<j} P_ij on N sites of dimension d, for every N. The bond space has
// d^2 + 2 channels: one "before the pair" channel, d^2 "inside the pair"
// channels remembering which components the opening site emitted, and one
// "after the pair" channel selected by the boundary. Site slot convention
// throughout: the first feature slot is the output (row) index.
struct PermutationMpo {
  std::size_t phys_dim = 0;
  std::size_t bond_dim = 0;  // phys_dim^2 + 2
  Tensor core;               // [D,D,d,d]
  Tensor boundary;           // [D,D]
};
PermutationMpo build_permutation_mpo(std::size_t phys_dim);

// The permutation MPO with its pair channels conjugated by query/key maps:
// the opening emission becomes (W_Q^T E_{ts} W_K) and the closing emission
// (W_Q^T E_{st} W_K), so the dense operator is the W-sandwiched exchange
// sum. With wq = wk = I the cores reduce exactly to the raw permutation
// MPO. The returned layer is uniform, linear, and unnormalized.
MpoLayer assemble_attention_layer(const Tensor& wq, const Tensor& wk);

// psi_j = sum_l (q_j . k_l) q_l with q = W_Q e, k = W_K e.
std::vector<Tensor> linear_attention_reference(const std::vector<Tensor>& emb,
                                               const Tensor& wq,
                                               const Tensor& wk);

// General-value extension: the layer emits q vectors, so left-multiplying
// every site output by W^V (W^Q)^{-1} turns them into v = W_V e vectors.
// Requires wq invertible.
Tensor value_extension_matrix(const Tensor& wq, const Tensor& wv);
std::vector<Tensor> apply_value_map(const Tensor& vmap,
                                    const std::vector<Tensor>& outputs);

// Deviations between the assembled layer's site outputs m_j and the
// closed-form predictions:
//   (i)  m_j = c q_j + sum_{i != j} q_i (k_i . q_j),
//        c   = sum over unordered pairs {i,l} avoiding j of
//              (q_i . k_l)(k_i . q_l)
//   (ii) m_j + q_j (k_j . q_j) - c q_j = linear attention output psi_j.
// Both are exact identities for wq = wk = I on unit-norm embeddings and are
// reported as max-abs deviations, not asserted, so deviating query/key maps
// can be studied.
struct EquivalenceReport {
  double pair_sum_deviation = 0.0;     // identity (i)
  double attention_deviation = 0.0;    // identity (ii)
};
EquivalenceReport verify_equivalence(const std::vector<Tensor>& emb,
                                     const Tensor& wq, const Tensor& wk);

}  // namespace dtn

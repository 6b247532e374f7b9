#include "dtn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dtn/tape.hpp"

namespace dtn {

namespace {

// Channel layout of the pair-exchange bond space.
struct Channels {
  std::size_t d, pre, post;
  std::size_t pair(std::size_t t, std::size_t s) const {
    return 1 + d * t + s;
  }
};

Channels channels_for(std::size_t d) { return {d, 0, d * d + 1}; }

void check_map(const Tensor& w, std::size_t d, const char* name) {
  if (w.rank() != 2 || w.shape()[0] != d || w.shape()[1] != d)
    throw std::invalid_argument(std::string(name) + ": expected a [d,d] map");
}

}  // namespace

PermutationMpo build_permutation_mpo(std::size_t phys_dim) {
  if (phys_dim == 0)
    throw std::invalid_argument("build_permutation_mpo: zero dimension");
  const std::size_t d = phys_dim;
  const Channels ch = channels_for(d);
  const std::size_t D = d * d + 2;

  PermutationMpo mpo;
  mpo.phys_dim = d;
  mpo.bond_dim = D;
  mpo.core = Tensor{Shape{D, D, d, d}};
  // Pass-through: every channel carries the site unchanged while the pair
  // acts elsewhere.
  for (std::size_t b = 0; b < D; ++b)
    for (std::size_t s = 0; s < d; ++s) mpo.core.at(b, b, s, s) = 1.0;
  for (std::size_t t = 0; t < d; ++t)
    for (std::size_t s = 0; s < d; ++s) {
      // Opening site: emit |t><s| and remember (t,s) in the channel.
      mpo.core.at(ch.pre, ch.pair(t, s), t, s) = 1.0;
      // Closing site: emit the transposed dyad |s><t|.
      mpo.core.at(ch.pair(t, s), ch.post, s, t) = 1.0;
    }
  // The trace closes only paths that entered before the pair and left after
  // it, so exactly one pair acts per path.
  mpo.boundary = Tensor{Shape{D, D}};
  mpo.boundary.at(ch.post, ch.pre) = 1.0;
  return mpo;
}

MpoLayer assemble_attention_layer(const Tensor& wq, const Tensor& wk) {
  if (wq.rank() != 2 || wq.shape()[0] != wq.shape()[1])
    throw std::invalid_argument("assemble_attention_layer: wq must be square");
  const std::size_t d = wq.shape()[0];
  check_map(wq, d, "assemble_attention_layer: wq");
  check_map(wk, d, "assemble_attention_layer: wk");
  const Channels ch = channels_for(d);
  const std::size_t D = d * d + 2;

  Tensor core{Shape{D, D, d, d}};
  for (std::size_t b = 0; b < D; ++b)
    for (std::size_t s = 0; s < d; ++s) core.at(b, b, s, s) = 1.0;
  for (std::size_t t = 0; t < d; ++t)
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t so = 0; so < d; ++so)    // output slot
        for (std::size_t si = 0; si < d; ++si)  // input slot
        {
          // Opening emission W_Q^T E_{ts} W_K: contracted with the site
          // features it produces q_t k_s.
          core.at(ch.pre, ch.pair(t, s), so, si) += wq.at(t, so) * wk.at(s, si);
          // Closing emission W_Q^T E_{st} W_K, producing q_s k_t.
          core.at(ch.pair(t, s), ch.post, so, si) += wq.at(s, so) * wk.at(t, si);
        }

  MpoLayer layer;
  layer.phys_dim = d;
  layer.bond_dim = D;
  layer.num_sites = 0;
  layer.cores.push_back(std::move(core));
  layer.boundary = Tensor{Shape{D, D}};
  layer.boundary.at(ch.post, ch.pre) = 1.0;
  layer.opts = MpoOptions{};  // linear, no residual, no normalization
  return layer;
}

std::vector<Tensor> linear_attention_reference(const std::vector<Tensor>& emb,
                                               const Tensor& wq,
                                               const Tensor& wk) {
  if (emb.empty())
    throw std::invalid_argument("linear_attention_reference: empty input");
  const std::size_t d = emb[0].size();
  check_map(wq, d, "linear_attention_reference: wq");
  check_map(wk, d, "linear_attention_reference: wk");
  const std::size_t n = emb.size();
  std::vector<Tensor> q(n), k(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = contract(wq, emb[i], {{1, 0}});
    k[i] = contract(wk, emb[i], {{1, 0}});
  }
  std::vector<Tensor> psi(n);
  for (std::size_t j = 0; j < n; ++j) {
    Tensor acc{Shape{d}};
    for (std::size_t l = 0; l < n; ++l) {
      const double w = dot(q[j], k[l]);
      for (std::size_t c = 0; c < d; ++c) acc[c] += w * q[l][c];
    }
    psi[j] = std::move(acc);
  }
  return psi;
}

Tensor value_extension_matrix(const Tensor& wq, const Tensor& wv) {
  if (wq.rank() != 2 || wq.shape()[0] != wq.shape()[1])
    throw std::invalid_argument("value_extension_matrix: wq must be square");
  const std::size_t d = wq.shape()[0];
  check_map(wv, d, "value_extension_matrix: wv");

  // Invert wq by Gauss-Jordan with partial pivoting; d is tiny here.
  Tensor a = wq;
  Tensor inv = Tensor::identity(d);
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max(scale, std::abs(a[i]));
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    if (std::abs(a.at(piv, col)) <= 1e-13 * scale)
      throw std::invalid_argument("value_extension_matrix: wq is singular");
    if (piv != col)
      for (std::size_t c = 0; c < d; ++c) {
        std::swap(a.at(piv, c), a.at(col, c));
        std::swap(inv.at(piv, c), inv.at(col, c));
      }
    const double p = a.at(col, col);
    for (std::size_t c = 0; c < d; ++c) {
      a.at(col, c) /= p;
      inv.at(col, c) /= p;
    }
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) {
        a.at(r, c) -= f * a.at(col, c);
        inv.at(r, c) -= f * inv.at(col, c);
      }
    }
  }
  return contract(wv, inv, {{1, 0}});
}

std::vector<Tensor> apply_value_map(const Tensor& vmap,
                                    const std::vector<Tensor>& outputs) {
  std::vector<Tensor> mapped;
  mapped.reserve(outputs.size());
  for (const Tensor& m : outputs)
    mapped.push_back(contract(vmap, m, {{1, 0}}));
  return mapped;
}

EquivalenceReport verify_equivalence(const std::vector<Tensor>& emb,
                                     const Tensor& wq, const Tensor& wk) {
  if (emb.empty())
    throw std::invalid_argument("verify_equivalence: empty input");
  const std::size_t d = emb[0].size();
  const std::size_t n = emb.size();
  for (const Tensor& e : emb)
    if (e.rank() != 1 || e.size() != d)
      throw std::invalid_argument("verify_equivalence: ragged embeddings");

  // Layer outputs m_j.
  MpoLayer layer = assemble_attention_layer(wq, wk);
  Tape tape;
  MpoBinding bind = bind_mpo(tape, layer);
  std::vector<NodeId> phi;
  phi.reserve(n);
  for (const Tensor& e : emb) phi.push_back(tape.input(e));
  std::vector<NodeId> out = mpo_forward_nodes(tape, layer, bind, phi);

  std::vector<Tensor> q(n), k(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = contract(wq, emb[i], {{1, 0}});
    k[i] = contract(wk, emb[i], {{1, 0}});
  }
  std::vector<Tensor> psi = linear_attention_reference(emb, wq, wk);

  EquivalenceReport rep;
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor& m = tape.val(out[j]);

    double c = 0.0;  // unordered pairs {i,l}, both distinct from j
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      for (std::size_t l = i + 1; l < n; ++l) {
        if (l == j) continue;
        c += dot(q[i], k[l]) * dot(k[i], q[l]);
      }
    }

    Tensor rhs = scale(q[j], c);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      const double w = dot(k[i], q[j]);
      for (std::size_t x = 0; x < d; ++x) rhs[x] += w * q[i][x];
    }
    rep.pair_sum_deviation =
        std::max(rep.pair_sum_deviation, max_abs_diff(m, rhs));

    Tensor lhs = m;
    const double self = dot(k[j], q[j]);
    for (std::size_t x = 0; x < d; ++x)
      lhs[x] += self * q[j][x] - c * q[j][x];
    rep.attention_deviation =
        std::max(rep.attention_deviation, max_abs_diff(lhs, psi[j]));
  }
  return rep;
}

}  // namespace dtn

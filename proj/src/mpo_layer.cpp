#include "dtn/mpo_layer.hpp"

#include <stdexcept>
#include <string>

namespace dtn {

MpoLayer make_mpo_layer(std::size_t phys_dim, std::size_t bond_dim,
                        std::size_t num_sites, MpoOptions opts, double noise,
                        Rng& rng) {
  if (phys_dim == 0 || bond_dim == 0)
    throw std::invalid_argument("make_mpo_layer: zero dimension");
  if (opts.activation == Activation::kMatrixExp && phys_dim != 2)
    throw std::invalid_argument(
        "make_mpo_layer: matrix-exponential activation needs phys_dim == 2");
  MpoLayer layer;
  layer.phys_dim = phys_dim;
  layer.bond_dim = bond_dim;
  layer.num_sites = num_sites;
  layer.opts = opts;
  const std::size_t d = phys_dim, D = bond_dim;
  const std::size_t n_cores = num_sites == 0 ? 1 : num_sites;
  layer.cores.reserve(n_cores);
  for (std::size_t c = 0; c < n_cores; ++c) {
    Tensor m{Shape{D, D, d, d}};
    for (std::size_t a = 0; a < D; ++a)
      for (std::size_t b = 0; b < D; ++b)
        for (std::size_t s = 0; s < d; ++s)
          for (std::size_t t = 0; t < d; ++t)
            m.at(a, b, s, t) =
                (a == b && s == t ? 1.0 : 0.0) + noise * rng.normal();
    layer.cores.push_back(std::move(m));
  }
  layer.boundary = Tensor::identity(D);
  return layer;
}

MpoBinding bind_mpo(Tape& tape, const MpoLayer& layer) {
  MpoBinding b;
  b.cores.reserve(layer.cores.size());
  for (const Tensor& c : layer.cores) b.cores.push_back(tape.param(c));
  b.boundary = tape.param(layer.boundary);
  return b;
}

namespace {

NodeId core_node(const MpoLayer& layer, const MpoBinding& bind, std::size_t j) {
  return bind.cores[layer.uniform() ? 0 : j];
}

// Divide by the Frobenius norm on the tape; a zero norm means the layer's
// numbers have collapsed and nothing downstream is meaningful.
NodeId unit_normalized(Tape& tape, NodeId x, const char* what) {
  NodeId n = tape.frobenius_norm(x);
  if (tape.scalar_val(n) == 0.0)
    throw std::runtime_error(std::string(what) +
                             ": Frobenius norm is exactly zero");
  return tape.div_scalar(x, n);
}

}  // namespace

MpoTrace mpo_apply(Tape& tape, const MpoLayer& layer, const MpoBinding& bind,
                   std::span<const NodeId> phi) {
  const std::size_t n = phi.size();
  if (n == 0) throw std::invalid_argument("mpo_apply: empty input");
  if (!layer.uniform() && n != layer.num_sites)
    throw std::invalid_argument("mpo_apply: layer built for " +
                                std::to_string(layer.num_sites) +
                                " sites, got " + std::to_string(n));
  for (NodeId p : phi)
    if (tape.val(p).rank() != 1 || tape.val(p).size() != layer.phys_dim)
      throw std::invalid_argument("mpo_apply: feature dim mismatch");

  const bool norm_ctx = layer.opts.normalize_contexts;
  MpoTrace tr;
  tr.theta.resize(n);
  tr.left.resize(n);
  tr.right.resize(n);
  tr.local.resize(n);
  tr.output.resize(n);

  // Transfer matrices: both feature slots of the core close on the same
  // input vector.
  for (std::size_t j = 0; j < n; ++j) {
    NodeId half = tape.contract(core_node(layer, bind, j), phi[j], {{3, 0}});
    tr.theta[j] = tape.contract(half, phi[j], {{2, 0}});
  }

  // Left contexts: identity seed, then running products of Theta.
  {
    NodeId seed = tape.input(Tensor::identity(layer.bond_dim));
    tr.left[0] = norm_ctx ? unit_normalized(tape, seed, "left context") : seed;
    for (std::size_t j = 1; j < n; ++j) {
      NodeId next = tape.contract(tr.left[j - 1], tr.theta[j - 1], {{1, 0}});
      tr.left[j] = norm_ctx ? unit_normalized(tape, next, "left context") : next;
    }
  }

  // Right contexts: boundary seed, growing leftwards.
  {
    tr.right[n - 1] = norm_ctx
                          ? unit_normalized(tape, bind.boundary, "right context")
                          : bind.boundary;
    for (std::size_t j = n - 1; j-- > 0;) {
      NodeId next = tape.contract(tr.theta[j + 1], tr.right[j + 1], {{1, 0}});
      tr.right[j] =
          norm_ctx ? unit_normalized(tape, next, "right context") : next;
    }
  }

  // Local weights H(j)[s,t] = Tr(HL M^{s,t} HR). The trace is evaluated as
  // <M, K> with K[b,c] = sum_x HL[x,b] HR[c,x], which costs D^3 + d^2 D^2
  // per site instead of d^2 D^3.
  for (std::size_t j = 0; j < n; ++j) {
    NodeId k = tape.contract(tr.left[j], tr.right[j], {{0, 1}});
    tr.local[j] =
        tape.contract(core_node(layer, bind, j), k, {{0, 0}, {1, 1}});
  }

  // Per-site activation, residual, output normalization.
  for (std::size_t j = 0; j < n; ++j) {
    NodeId z = tape.contract(tr.local[j], phi[j], {{1, 0}});
    switch (layer.opts.activation) {
      case Activation::kLinear:
        break;
      case Activation::kSigmoid:
        z = tape.sigmoid(z);
        break;
      case Activation::kMatrixExp:
        z = tape.contract(tape.exp2x2(tr.local[j]), phi[j], {{1, 0}});
        break;
    }
    if (layer.opts.residual) z = tape.add(phi[j], z);
    if (layer.opts.normalize_output)
      z = unit_normalized(tape, z, "output normalization");
    tr.output[j] = z;
  }
  return tr;
}

std::vector<NodeId> mpo_forward_nodes(Tape& tape, const MpoLayer& layer,
                                      const MpoBinding& bind,
                                      std::span<const NodeId> phi) {
  return mpo_apply(tape, layer, bind, phi).output;
}

std::vector<Tensor> mpo_forward_factored(const MpoLayer& layer,
                                         const Tensor& u_mat,
                                         const Tensor& v_mat,
                                         std::span<const Tensor> phi) {
  if (layer.opts.normalize_contexts)
    throw std::invalid_argument(
        "mpo_forward_factored: context normalization needs the full contexts");
  const std::size_t n = phi.size();
  const std::size_t D = layer.bond_dim;
  if (n == 0) throw std::invalid_argument("mpo_forward_factored: empty input");
  if (!layer.uniform() && n != layer.num_sites)
    throw std::invalid_argument("mpo_forward_factored: wrong sequence length");
  if (u_mat.rank() != 2 || v_mat.rank() != 2 || u_mat.shape()[0] != D ||
      v_mat.shape()[0] != D || u_mat.shape()[1] != v_mat.shape()[1])
    throw std::invalid_argument(
        "mpo_forward_factored: boundary factors must be [D, rank]");

  std::vector<Tensor> theta(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor& m = layer.core(j);
    theta[j] = contract(contract(m, phi[j], {{3, 0}}), phi[j], {{2, 0}});
  }

  // G = sum_k u_k v_k^T turns HL / HR into row and column vector chains:
  //   lrows(j) = v^T Theta(1) ... Theta(j-1)        [r, D]
  //   rrows(j) = (Theta(j+1) ... Theta(n) u)^T      [r, D]
  std::vector<Tensor> lrows(n), rrows(n);
  lrows[0] = transpose(v_mat);
  for (std::size_t j = 1; j < n; ++j)
    lrows[j] = contract(lrows[j - 1], theta[j - 1], {{1, 0}});
  rrows[n - 1] = transpose(u_mat);
  for (std::size_t j = n - 1; j-- > 0;)
    rrows[j] = contract(rrows[j + 1], theta[j + 1], {{1, 1}});

  std::vector<Tensor> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    // H(j) = sum_k l_k M r_k, assembled as one [r,D,d,d] intermediate.
    Tensor p = contract(lrows[j], layer.core(j), {{1, 0}});
    Tensor h = contract(p, rrows[j], {{0, 0}, {1, 1}});
    Tensor z = contract(h, phi[j], {{1, 0}});
    switch (layer.opts.activation) {
      case Activation::kLinear:
        break;
      case Activation::kSigmoid:
        z = sigmoid(z);
        break;
      case Activation::kMatrixExp:
        z = contract(matrix_exp_2x2(h), phi[j], {{1, 0}});
        break;
    }
    if (layer.opts.residual) z = add(phi[j], z);
    if (layer.opts.normalize_output) {
      const double nz = frobenius_norm(z);
      if (nz == 0.0)
        throw std::runtime_error(
            "mpo_forward_factored: output norm is exactly zero");
      z = scale(z, 1.0 / nz);
    }
    out[j] = std::move(z);
  }
  return out;
}

double mpo_cost_estimate(std::size_t num_sites, std::size_t phys_dim,
                         std::size_t bond_dim, std::size_t boundary_rank) {
  const double n = static_cast<double>(num_sites);
  const double d = static_cast<double>(phys_dim);
  const double D = static_cast<double>(bond_dim);
  const double r = static_cast<double>(boundary_rank);
  return n * d * d * D * D * r;
}

}  // namespace dtn

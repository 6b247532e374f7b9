#include "dtn/mps_head.hpp"

#include <stdexcept>
#include <string>

namespace dtn {

MpsHead make_mps_head(std::size_t num_classes, std::size_t phys_dim,
                      std::size_t bond_dim, std::size_t num_sites,
                      double noise, Rng& rng) {
  if (num_classes < 2)
    throw std::invalid_argument("make_mps_head: need at least two classes");
  if (phys_dim == 0 || bond_dim == 0)
    throw std::invalid_argument("make_mps_head: zero dimension");
  MpsHead head;
  head.num_classes = num_classes;
  head.phys_dim = phys_dim;
  head.bond_dim = bond_dim;
  head.num_sites = num_sites;
  const std::size_t d = phys_dim, D = bond_dim;
  const std::size_t n_cores = num_sites == 0 ? 1 : num_sites;
  head.cores.reserve(n_cores);
  for (std::size_t c = 0; c < n_cores; ++c) {
    Tensor a{Shape{d, D, D}};
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j)
          a.at(s, i, j) = (i == j ? 1.0 : 0.0) + noise * rng.normal();
    head.cores.push_back(std::move(a));
  }
  head.class_tensor = Tensor{Shape{num_classes, D, D}};
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j < D; ++j)
        head.class_tensor.at(c, i, j) =
            (i == j ? 1.0 : 0.0) + noise * rng.normal();
  head.boundary = Tensor::identity(D);
  return head;
}

MpsHeadBinding bind_mps_head(Tape& tape, const MpsHead& head) {
  MpsHeadBinding b;
  b.cores.reserve(head.cores.size());
  for (const Tensor& c : head.cores) b.cores.push_back(tape.param(c));
  b.class_tensor = tape.param(head.class_tensor);
  b.boundary = tape.param(head.boundary);
  return b;
}

namespace {

// Rescale a running product to unit norm, remembering log(norm). A norm of
// exactly zero is left alone — the product is zero and stays zero, and no
// log is recorded for it.
NodeId rescaled(Tape& tape, NodeId x, std::vector<NodeId>& logs) {
  NodeId n = tape.frobenius_norm(x);
  if (tape.scalar_val(n) == 0.0) return x;
  logs.push_back(tape.log(n));
  return tape.div_scalar(x, n);
}

}  // namespace

NodeId mps_head_logits(Tape& tape, const MpsHead& head,
                       const MpsHeadBinding& bind,
                       std::span<const NodeId> phi) {
  const std::size_t n = phi.size();
  if (n == 0) throw std::invalid_argument("mps_head_logits: empty input");
  if (!head.uniform() && n != head.num_sites)
    throw std::invalid_argument("mps_head_logits: head built for " +
                                std::to_string(head.num_sites) +
                                " sites, got " + std::to_string(n));
  for (NodeId p : phi)
    if (tape.val(p).rank() != 1 || tape.val(p).size() != head.phys_dim)
      throw std::invalid_argument("mps_head_logits: feature dim mismatch");

  auto site_matrix = [&](std::size_t j) {
    NodeId core = bind.cores[head.uniform() ? 0 : j];
    return tape.contract(phi[j], core, {{0, 0}});  // [D,D]
  };

  const std::size_t mid = n / 2;
  std::vector<NodeId> logs;

  // Left block: boundary followed by sites 1..mid.
  NodeId left = bind.boundary;
  for (std::size_t j = 0; j < mid; ++j) {
    left = tape.contract(left, site_matrix(j), {{1, 0}});
    left = rescaled(tape, left, logs);
  }

  // Right block: sites mid+1..N, built right to left.
  NodeId right = site_matrix(n - 1);
  right = rescaled(tape, right, logs);
  for (std::size_t j = n - 1; j-- > mid;) {
    right = tape.contract(site_matrix(j), right, {{1, 0}});
    right = rescaled(tape, right, logs);
  }

  // logit_c = sum_{a,b} C[c,a,b] K[a,b] with K[a,b] = sum_x L[x,a] R[b,x],
  // i.e. the trace Tr(L C^c R) with the class axis kept free.
  NodeId k = tape.contract(left, right, {{0, 1}});
  NodeId raw = tape.contract(bind.class_tensor, k, {{1, 0}, {2, 1}});

  if (logs.empty()) return raw;
  NodeId total = logs.size() == 1 ? logs[0] : tape.sum_n(logs);
  return tape.mul_scalar(raw, tape.exp(total));
}

}  // namespace dtn

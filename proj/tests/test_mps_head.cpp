#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dtn/embedding.hpp"
#include "dtn/mps_head.hpp"
#include "dtn/rng.hpp"
#include "oracles.hpp"

using namespace dtn;

namespace {

std::vector<double> head_logits(const MpsHead& head,
                                const std::vector<Tensor>& phi) {
  Tape tape;
  MpsHeadBinding bind = bind_mps_head(tape, head);
  std::vector<NodeId> in;
  for (const Tensor& p : phi) in.push_back(tape.input(p));
  NodeId out = mps_head_logits(tape, head, bind, in);
  const Tensor& v = tape.val(out);
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<Tensor> random_phi(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Tensor> phi(n);
  for (std::size_t j = 0; j < n; ++j) {
    Tensor v(Shape{d});
    for (std::size_t s = 0; s < d; ++s) v[s] = rng.normal();
    phi[j] = v;
  }
  return phi;
}

}  // namespace

TEST_CASE("factory invariants") {
  Rng rng(1);
  MpsHead h = make_mps_head(4, 2, 3, 0, 0.05, rng);
  CHECK(h.uniform());
  CHECK(h.cores.size() == 1);
  CHECK(h.cores[0].shape() == Shape{2, 3, 3});
  CHECK(h.class_tensor.shape() == Shape{4, 3, 3});
  CHECK(max_abs_diff(h.boundary, Tensor::identity(3)) == 0.0);
  CHECK_THROWS_AS(make_mps_head(1, 2, 3, 0, 0.05, rng),
                  std::invalid_argument);  // needs >= 2 classes
}

TEST_CASE("noise-0 head gives every class the logit D") {
  // All transfer matrices are (phi_0 + phi_1) I; embedded inputs satisfy
  // phi_0 + phi_1 = 1, so the product telescopes to Tr(I) = D per class.
  Rng rng(2);
  const std::size_t D = 5;
  MpsHead head = make_mps_head(3, 2, D, 0, 0.0, rng);
  for (std::size_t n : {1u, 2u, 7u, 40u}) {
    std::vector<Tensor> phi;
    Rng xr(n);
    for (std::size_t j = 0; j < n; ++j) phi.push_back(embed(xr.uniform01()));
    std::vector<double> logits = head_logits(head, phi);
    REQUIRE(logits.size() == 3);
    for (double l : logits) CHECK(l == doctest::Approx(double(D)).epsilon(1e-12));
  }
}

TEST_CASE("logits match the plain dense product, uniform and per-site") {
  Rng rng(37);
  for (int instance = 0; instance < 25; ++instance) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t D = 2 + rng.below(3);
    const std::size_t C = 2 + rng.below(3);
    const bool uniform = instance % 2;
    MpsHead head = make_mps_head(C, 2, D, uniform ? 0 : n, 0.4, rng);

    std::vector<Tensor> phi = random_phi(n, 2, rng);
    std::vector<double> got = head_logits(head, phi);

    std::vector<std::vector<double>> cores;
    for (std::size_t j = 0; j < n; ++j) {
      const Tensor& c = head.core(j);
      cores.emplace_back(c.data(), c.data() + c.size());
    }
    std::vector<std::vector<double>> phim;
    for (const Tensor& p : phi)
      phim.emplace_back(p.data(), p.data() + p.size());
    std::vector<double> want = oracle::dense_mps_logits(
        cores,
        std::vector<double>(head.class_tensor.data(),
                            head.class_tensor.data() + head.class_tensor.size()),
        std::vector<double>(head.boundary.data(),
                            head.boundary.data() + head.boundary.size()),
        phim, n, 2, D, C);
    REQUIRE(got.size() == want.size());
    for (std::size_t c = 0; c < C; ++c) {
      INFO("instance ", instance, " class ", c);
      CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-9));
    }
  }
}

TEST_CASE("rescaled evaluation survives a transiently overflowing product") {
  // First half of the chain scaled up by 10, second half down by 10: a raw
  // left-to-right product would pass through 10^350 (past double range)
  // before collapsing back, but the result is exactly Tr(I) = D per class.
  // The per-step rescaling with log accumulation must sail through.
  Rng rng(5);
  const std::size_t n = 700, D = 3;
  MpsHead head = make_mps_head(2, 2, D, n, 0.0, rng);
  for (std::size_t j = 0; j < n; ++j) head.cores[j] *= j < n / 2 ? 10.0 : 0.1;
  std::vector<Tensor> phi(n, embed(0.5));
  std::vector<double> logits = head_logits(head, phi);
  for (double l : logits) CHECK(l == doctest::Approx(double(D)).epsilon(1e-9));
}

TEST_CASE("gradients flow to every head tensor") {
  Rng rng(6);
  MpsHead head = make_mps_head(3, 2, 2, 0, 0.1, rng);
  Tape tape;
  MpsHeadBinding bind = bind_mps_head(tape, head);
  std::vector<NodeId> in;
  for (int j = 0; j < 4; ++j) in.push_back(tape.input(embed(0.25 * j)));
  NodeId logits = mps_head_logits(tape, head, bind, in);
  tape.backward(tape.log_sum_exp(logits));
  for (std::size_t i = 0; i < tape.num_params(); ++i) {
    const Tensor& g = tape.param_grad(i);
    REQUIRE(!g.null());
    double norm = 0.0;
    for (std::size_t e = 0; e < g.size(); ++e) norm += g[e] * g[e];
    CHECK(norm > 0.0);
  }
}

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "dtn/rng.hpp"
#include "dtn/tape.hpp"
#include "oracles.hpp"

using namespace dtn;

namespace {

using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

// Records `build` over the given parameters, runs one backward pass, and
// checks every analytic parameter gradient entry against a central finite
// difference of the re-recorded value.
void check_grads(std::vector<Tensor> params, const Builder& build,
                 double tol = 1e-6, double h = 1e-6) {
  auto value = [&]() {
    Tape tape;
    std::vector<NodeId> ids;
    for (const Tensor& p : params) ids.push_back(tape.param(p));
    return tape.scalar_val(build(tape, ids));
  };

  Tape tape;
  std::vector<NodeId> ids;
  for (const Tensor& p : params) ids.push_back(tape.param(p));
  tape.backward(build(tape, ids));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = tape.param_grad(i);
    REQUIRE(!g.null());
    REQUIRE(g.shape() == params[i].shape());
    for (std::size_t e = 0; e < params[i].size(); ++e) {
      const double fd = oracle::central_diff(value, params[i][e], h);
      const double a = g[e];
      const double rel =
          std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 0.01});
      INFO("param ", i, " entry ", e, " analytic ", a, " fd ", fd);
      CHECK(rel < tol);
    }
  }
}

Tensor randt(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("eager values are computed at record time") {
  Tape tape;
  NodeId a = tape.input(Tensor::from(Shape{2}, {1, 2}));
  NodeId b = tape.input(Tensor::from(Shape{2}, {3, 4}));
  NodeId c = tape.add(a, b);
  CHECK(tape.val(c)[0] == 4.0);
  CHECK(tape.val(c)[1] == 6.0);
  CHECK(tape.scalar_val(tape.frobenius_norm(b)) == 5.0);
}

TEST_CASE("backward requires a single-element root") {
  Tape tape;
  NodeId v = tape.param(Tensor::from(Shape{2}, {1, 2}));
  CHECK_THROWS(tape.backward(v));
}

TEST_CASE("gradients through every elementwise op") {
  Rng rng(3);
  const Tensor a = randt(Shape{2, 3}, rng);
  Tensor b = randt(Shape{2, 3}, rng);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += b[i] < 0 ? -1.5 : 1.5;

  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.add(p[0], p[1]));
  });
  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.sub(p[0], p[1]));
  });
  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.mul(p[0], p[1]));
  });
  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.div(p[0], p[1]));  // b bounded away from 0
  });
  check_grads({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.scale(p[0], -2.5));
  });
  check_grads({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.sigmoid(p[0]));
  });
  check_grads({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.exp(p[0]));
  });
  check_grads({b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.abs(p[0]));  // entries bounded away from 0
  });
  Tensor pos = randt(Shape{2, 2}, rng);
  for (std::size_t i = 0; i < pos.size(); ++i)
    pos[i] = 0.5 + std::abs(pos[i]);
  check_grads({pos}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.log(p[0]));
  });
}

TEST_CASE("gradients through scalar-node scaling") {
  Rng rng(5);
  const Tensor a = randt(Shape{3}, rng);
  const Tensor s = Tensor::scalar(1.7);
  check_grads({a, s}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.mul_scalar(p[0], p[1]));
  });
  check_grads({a, s}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.div_scalar(p[0], p[1]));
  });
}

TEST_CASE("gradients through contract across axis layouts") {
  Rng rng(9);
  const Tensor m = randt(Shape{3, 4}, rng);
  const Tensor v = randt(Shape{4}, rng);
  check_grads({m, v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.contract(p[0], p[1], {{1, 0}}));
  });

  const Tensor a = randt(Shape{2, 3, 4}, rng, 0.5);
  const Tensor b = randt(Shape{4, 3, 2}, rng, 0.5);
  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.contract(p[0], p[1], {{2, 0}, {1, 1}}));
  });
  check_grads({a, b}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.contract(p[0], p[1], {{0, 2}}));
  });
  // Full contraction to a scalar
  check_grads({m}, [&](Tape& t, const std::vector<NodeId>& p) {
    NodeId c = t.input(m);
    return t.contract(p[0], c, {{0, 0}, {1, 1}});
  });
  // Outer product
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.contract(p[0], p[0], {}));
  });
}

TEST_CASE("gradients through the 2x2 exponential") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor h = randt(Shape{2, 2}, rng);
    if (trial % 4 == 0) {  // hit the equal-eigenvalue series branch
      h[1] = 0.0;
      h[2] = 0.0;
      h[3] = h[0];
    }
    const Tensor w = randt(Shape{2, 2}, rng);
    check_grads(
        {h},
        [&](Tape& t, const std::vector<NodeId>& p) {
          NodeId e = t.exp2x2(p[0]);
          return t.sum_squares(t.mul(e, t.input(w)));
        },
        5e-6, 1e-6);
  }
}

TEST_CASE("gradients through softmax and log-sum-exp") {
  Rng rng(17);
  const Tensor v = randt(Shape{4}, rng);
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.softmax(p[0]));
  });
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.log_sum_exp(p[0]);
  });
  // The classification loss composite: lse(v) - v[label]
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sub(t.log_sum_exp(p[0]), t.pick(p[0], 0, 2));
  });
}

TEST_CASE("gradients through norms") {
  Rng rng(19);
  const Tensor v = randt(Shape{2, 3}, rng);
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.frobenius_norm(p[0]);
  });
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(p[0]);
  });
  // Normalization composite a / ||a||, the context-normalization pattern
  check_grads({v}, [](Tape& t, const std::vector<NodeId>& p) {
    NodeId unit = t.div_scalar(p[0], t.frobenius_norm(p[0]));
    const Tensor w = Tensor::from(Shape{2, 3}, {1, -2, 3, -4, 5, -6});
    return t.sum_squares(t.mul(unit, t.input(w)));
  });
}

TEST_CASE("gradients through shape ops") {
  Rng rng(23);
  const Tensor a = randt(Shape{2, 6}, rng);
  check_grads({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.reshape(p[0], Shape{3, 4}));
  });
  const Tensor w = randt(Shape{6, 2}, rng);
  check_grads({a}, [&](Tape& t, const std::vector<NodeId>& p) {
    const std::uint8_t perm[] = {1, 0};
    NodeId tr = t.transpose(p[0], perm);
    return t.sum_squares(t.mul(tr, t.input(w)));
  });
  check_grads({a}, [](Tape& t, const std::vector<NodeId>& p) {
    return t.sum_squares(t.pick(p[0], 1, 3));
  });
  const Tensor b = randt(Shape{3}, rng);
  const Tensor c = randt(Shape{3}, rng);
  check_grads({b, c}, [](Tape& t, const std::vector<NodeId>& p) {
    const NodeId parts[] = {p[0], p[1], p[0]};  // reused input
    return t.sum_squares(t.stack(parts));
  });
  check_grads({b, c}, [](Tape& t, const std::vector<NodeId>& p) {
    const NodeId terms[] = {p[0], p[1], p[1]};
    return t.sum_squares(t.sum_n(terms));
  });
}

TEST_CASE("one tape, many graphs: backward sums per-sample gradients") {
  Rng rng(29);
  Tensor w = randt(Shape{2, 2}, rng);
  const Tensor x1 = randt(Shape{2}, rng);
  const Tensor x2 = randt(Shape{2}, rng);

  auto loss_of = [&](const Tensor& x) {
    Tape t;
    NodeId p = t.param(w);
    NodeId out = t.contract(p, t.input(x), {{1, 0}});
    t.backward(t.sum_squares(out));
    return t.param_grad(0);
  };
  const Tensor g1 = loss_of(x1);
  const Tensor g2 = loss_of(x2);

  Tape t;
  NodeId p = t.param(w);
  NodeId l1 = t.sum_squares(t.contract(p, t.input(x1), {{1, 0}}));
  NodeId l2 = t.sum_squares(t.contract(p, t.input(x2), {{1, 0}}));
  const NodeId both[] = {l1, l2};
  t.backward(t.sum_n(both));
  const Tensor& g = t.param_grad(0);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(g[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("untouched parameters report zero gradients") {
  Tape t;
  NodeId used = t.param(Tensor::from(Shape{2}, {1, 2}));
  t.param(Tensor::from(Shape{3}, {1, 2, 3}));  // bound, never used
  t.backward(t.sum_squares(used));
  const Tensor& g = t.param_grad(1);
  REQUIRE(!g.null());
  CHECK(g.shape() == Shape{3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("reset clears the recording but keeps the tape usable") {
  Tape t;
  t.param(Tensor::scalar(2.0));
  CHECK(t.size() == 1);
  t.reset();
  CHECK(t.size() == 0);
  CHECK(t.num_params() == 0);
  NodeId p = t.param(Tensor::scalar(3.0));
  t.backward(t.mul(p, p));
  CHECK(t.param_grad(0)[0] == doctest::Approx(6.0));
}

#include <cstdio>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dtn/ca.hpp"
#include "dtn/rng.hpp"
#include "oracles.hpp"

using namespace dtn;

namespace {

std::vector<std::uint8_t> bits(std::initializer_list<int> v) {
  return std::vector<std::uint8_t>(v.begin(), v.end());
}

}  // namespace

TEST_CASE("rule 30 hand-checked rings") {
  CHECK(ca_step(bits({0, 0, 1, 0, 0}), 30) == bits({0, 1, 1, 1, 0}));
  CHECK(ca_step(bits({1, 0, 0, 0, 0}), 30) == bits({1, 1, 0, 0, 1}));
}

TEST_CASE("rule bit indexing follows the Wolfram convention") {
  // Rule 30 = 00011110b over neighborhoods 111..000
  CHECK(ca_rule_bit(30, 1, 1, 1) == 0);
  CHECK(ca_rule_bit(30, 1, 0, 0) == 1);
  CHECK(ca_rule_bit(30, 0, 1, 1) == 1);
  CHECK(ca_rule_bit(30, 0, 0, 0) == 0);
  // Rule 204 copies the center cell
  for (int l = 0; l < 2; ++l)
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) CHECK(ca_rule_bit(204, l, c, r) == c);
}

TEST_CASE("rule 30 agrees with its boolean form on random rings") {
  Rng rng(1);
  for (std::size_t width = 1; width <= 11; ++width) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint8_t> state(width);
      std::vector<int> asint(width);
      for (std::size_t i = 0; i < width; ++i) {
        state[i] = rng.coin() ? 1 : 0;
        asint[i] = state[i];
      }
      std::vector<std::uint8_t> got = ca_step(state, 30);
      std::vector<int> want = oracle::rule30_step_formula(asint);
      REQUIRE(got.size() == width);
      for (std::size_t i = 0; i < width; ++i) CHECK(int(got[i]) == want[i]);
    }
  }
}

TEST_CASE("multi-step evolution iterates the single step") {
  std::vector<std::uint8_t> state = bits({0, 1, 1, 0, 1, 0, 0});
  std::vector<std::uint8_t> two = ca_evolve(state, 30, 2);
  CHECK(two == ca_step(ca_step(state, 30), 30));
  CHECK(ca_evolve(state, 30, 0) == state);
}

TEST_CASE("validation of rules and cells") {
  CHECK_THROWS_AS(ca_step(bits({0, 1}), -1), std::invalid_argument);
  CHECK_THROWS_AS(ca_step(bits({0, 1}), 256), std::invalid_argument);
  CHECK_THROWS_AS(ca_step(bits({0, 2}), 30), std::invalid_argument);
}

TEST_CASE("exhaustive dataset enumerates all rings MSB-first") {
  std::vector<CaSample> ds = ca_dataset_exhaustive(3, 30, 1);
  REQUIRE(ds.size() == 8);
  // Row i encodes i with site 0 as the most significant bit.
  CHECK(ds[0].x == std::vector<double>{0, 0, 0});
  CHECK(ds[1].x == std::vector<double>{0, 0, 1});
  CHECK(ds[4].x == std::vector<double>{1, 0, 0});
  CHECK(ds[7].x == std::vector<double>{1, 1, 1});
  // Targets are the evolved rings.
  for (const CaSample& s : ds) {
    std::vector<std::uint8_t> state(s.x.begin(), s.x.end());
    std::vector<std::uint8_t> want = ca_step(state, 30);
    REQUIRE(s.y.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s.y[i] == double(want[i]));
  }
}

TEST_CASE("exhaustive dataset width bounds") {
  CHECK_THROWS_AS(ca_dataset_exhaustive(0, 30, 1), std::invalid_argument);
  CHECK_THROWS_AS(ca_dataset_exhaustive(15, 30, 1), std::invalid_argument);
  CHECK(ca_dataset_exhaustive(14, 30, 1).size() == 16384);
}

TEST_CASE("the exhaustive set is closed under ring rotation") {
  // Periodic dynamics commute with rotation, and the exhaustive set contains
  // every ring, so rotating (x, y) in lockstep lands on another sample.
  std::vector<CaSample> ds = ca_dataset_exhaustive(4, 30, 1);
  auto index_of = [&](const std::vector<double>& x) {
    std::size_t idx = 0;
    for (double v : x) idx = idx * 2 + (v > 0.5 ? 1 : 0);
    return idx;
  };
  for (const CaSample& s : ds) {
    std::vector<double> rx(4), ry(4);
    for (std::size_t i = 0; i < 4; ++i) {
      rx[i] = s.x[(i + 1) % 4];
      ry[i] = s.y[(i + 1) % 4];
    }
    const CaSample& rotated = ds[index_of(rx)];
    CHECK(rotated.y == ry);
  }
}

TEST_CASE("random dataset is seed-deterministic with correct targets") {
  std::vector<CaSample> a = ca_dataset_random(20, 30, 2, 50, 777);
  std::vector<CaSample> b = ca_dataset_random(20, 30, 2, 50, 777);
  std::vector<CaSample> c = ca_dataset_random(20, 30, 2, 50, 778);
  REQUIRE(a.size() == 50);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < 50; ++i) {
    all_equal &= a[i].x == b[i].x && a[i].y == b[i].y;
    any_diff |= a[i].x != c[i].x;
    std::vector<std::uint8_t> state(a[i].x.begin(), a[i].x.end());
    std::vector<std::uint8_t> want = ca_evolve(state, 30, 2);
    for (std::size_t j = 0; j < 20; ++j) CHECK(a[i].y[j] == double(want[j]));
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("dataset cache round-trips through its text form") {
  std::vector<CaSample> ds = ca_dataset_random(9, 110, 1, 12, 5);
  const char* path = "ca_cache_test.txt";
  ca_save_dataset(path, ds);
  std::vector<CaSample> back = ca_load_dataset(path);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].x == ds[i].x);
    CHECK(back[i].y == ds[i].y);
  }
  std::remove(path);
}

TEST_CASE("dataset cache rejects malformed lines") {
  const char* path = "ca_cache_bad.txt";
  {
    FILE* f = std::fopen(path, "w");
    std::fputs("3 010 01\n", f);  // y shorter than width
    std::fclose(f);
  }
  CHECK_THROWS_AS(ca_load_dataset(path), std::runtime_error);
  std::remove(path);
}

TEST_CASE("evaluation scores the identity network honestly") {
  // A noise-0 sequence net decodes back exactly its binary input, i.e. it
  // predicts "nothing changes". Score it on rule 30: per-cell accuracy is
  // the fraction of cells the step leaves fixed, and only the all-zero ring
  // is fixed as a whole, so solved must be false.
  Rng rng(3);
  DeepTensorNetwork net;
  net.layers.push_back(make_mpo_layer(2, 2, 0, {}, 0.0, rng));
  std::vector<CaSample> ds = ca_dataset_exhaustive(4, 30, 1);
  CaEvalResult r = ca_evaluate(net, ds);

  std::size_t fixed_cells = 0, fixed_rings = 0, cells = 0;
  for (const CaSample& s : ds) {
    bool all = true;
    for (std::size_t i = 0; i < s.x.size(); ++i, ++cells) {
      const bool same = s.x[i] == s.y[i];
      fixed_cells += same;
      all &= same;
    }
    fixed_rings += all;
  }
  CHECK(r.site_accuracy == doctest::Approx(double(fixed_cells) / cells));
  CHECK(r.sequence_accuracy == doctest::Approx(double(fixed_rings) / 16.0));
  CHECK(!r.solved);

  // The same identity network does solve rule 204 (the copy rule).
  std::vector<CaSample> copy = ca_dataset_exhaustive(4, 204, 1);
  CaEvalResult rc = ca_evaluate(net, copy);
  CHECK(rc.solved);
  CHECK(rc.site_accuracy == 1.0);
  CHECK(rc.sequence_accuracy == 1.0);
}

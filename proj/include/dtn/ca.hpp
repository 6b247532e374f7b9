#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtn/model.hpp"

namespace dtn {

// Elementary cellular automata on a periodic ring. Rule numbers follow the
// usual convention: bit ((l<<2)|(c<<1)|r) of the rule byte is the next state
// of a cell with left/center/right neighborhood (l,c,r).

std::uint8_t ca_rule_bit(int rule, int l, int c, int r);
std::vector<std::uint8_t> ca_step(std::span<const std::uint8_t> state, int rule);
std::vector<std::uint8_t> ca_evolve(std::vector<std::uint8_t> state, int rule,
                                    int steps);

// One supervised example: the ring at time 0 and at time `steps`, both as
// 0/1 doubles ready for embedding.
struct CaSample {
  std::vector<double> x;
  std::vector<double> y;
};

// All 2^width initial states in ascending binary order (site 0 is the most
// significant bit).
std::vector<CaSample> ca_dataset_exhaustive(std::size_t width, int rule,
                                            int steps);
// `count` uniformly random initial states from a fixed seed.
std::vector<CaSample> ca_dataset_random(std::size_t width, int rule, int steps,
                                        std::size_t count, std::uint64_t seed);

// Plain-text dataset cache: one "width xbits ybits" record per line.
void ca_save_dataset(const std::string& path,
                     std::span<const CaSample> samples);
std::vector<CaSample> ca_load_dataset(const std::string& path);

struct CaEvalResult {
  double sequence_accuracy = 0.0;  // fraction of rings predicted exactly
  double site_accuracy = 0.0;      // fraction of individual cells correct
  bool solved = false;             // every ring exact
};

// Thresholds decoded outputs at 0.5 (ties round up) and scores exact-match
// ring prediction.
CaEvalResult ca_evaluate(const DeepTensorNetwork& net,
                         std::span<const CaSample> samples);

}  // namespace dtn

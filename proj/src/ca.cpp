#include "dtn/ca.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "dtn/rng.hpp"

namespace dtn {

std::uint8_t ca_rule_bit(int rule, int l, int c, int r) {
  const int idx = ((l & 1) << 2) | ((c & 1) << 1) | (r & 1);
  return static_cast<std::uint8_t>((rule >> idx) & 1);
}

std::vector<std::uint8_t> ca_step(std::span<const std::uint8_t> state,
                                  int rule) {
  const std::size_t w = state.size();
  if (w == 0) throw std::invalid_argument("ca_step: empty state");
  if (rule < 0 || rule > 255)
    throw std::invalid_argument("ca_step: rule must be in 0..255");
  for (std::uint8_t b : state)
    if (b > 1) throw std::invalid_argument("ca_step: non-binary cell");
  std::vector<std::uint8_t> next(w);
  for (std::size_t i = 0; i < w; ++i) {
    const std::uint8_t l = state[(i + w - 1) % w];
    const std::uint8_t c = state[i];
    const std::uint8_t r = state[(i + 1) % w];
    next[i] = ca_rule_bit(rule, l, c, r);
  }
  return next;
}

std::vector<std::uint8_t> ca_evolve(std::vector<std::uint8_t> state, int rule,
                                    int steps) {
  for (int s = 0; s < steps; ++s) state = ca_step(state, rule);
  return state;
}

namespace {

CaSample make_sample(const std::vector<std::uint8_t>& init, int rule,
                     int steps) {
  const std::vector<std::uint8_t> fin = ca_evolve(init, rule, steps);
  CaSample s;
  s.x.reserve(init.size());
  s.y.reserve(init.size());
  for (std::uint8_t b : init) s.x.push_back(static_cast<double>(b));
  for (std::uint8_t b : fin) s.y.push_back(static_cast<double>(b));
  return s;
}

}  // namespace

std::vector<CaSample> ca_dataset_exhaustive(std::size_t width, int rule,
                                            int steps) {
  if (width == 0 || width > 14)
    throw std::invalid_argument(
        "ca_dataset_exhaustive: width out of range (1..14); sample wider rings");
  const std::size_t total = std::size_t{1} << width;
  std::vector<CaSample> out;
  out.reserve(total);
  std::vector<std::uint8_t> init(width);
  for (std::size_t code = 0; code < total; ++code) {
    for (std::size_t j = 0; j < width; ++j)
      init[j] = static_cast<std::uint8_t>((code >> (width - 1 - j)) & 1);
    out.push_back(make_sample(init, rule, steps));
  }
  return out;
}

std::vector<CaSample> ca_dataset_random(std::size_t width, int rule, int steps,
                                        std::size_t count, std::uint64_t seed) {
  if (width == 0) throw std::invalid_argument("ca_dataset_random: zero width");
  Rng rng(seed);
  std::vector<CaSample> out;
  out.reserve(count);
  std::vector<std::uint8_t> init(width);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < width; ++j)
      init[j] = rng.coin() ? 1 : 0;
    out.push_back(make_sample(init, rule, steps));
  }
  return out;
}

void ca_save_dataset(const std::string& path,
                     std::span<const CaSample> samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ca_save_dataset: cannot open " + path);
  for (const CaSample& s : samples) {
    out << s.x.size() << ' ';
    for (double v : s.x) out << (v != 0.0 ? '1' : '0');
    out << ' ';
    for (double v : s.y) out << (v != 0.0 ? '1' : '0');
    out << '\n';
  }
  if (!out) throw std::runtime_error("ca_save_dataset: write failed");
}

std::vector<CaSample> ca_load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ca_load_dataset: cannot open " + path);
  std::vector<CaSample> out;
  std::size_t width;
  std::string xs, ys;
  while (in >> width >> xs >> ys) {
    if (xs.size() != width || ys.size() != width)
      throw std::runtime_error("ca_load_dataset: record " +
                               std::to_string(out.size()) +
                               " does not match its width prefix");
    CaSample s;
    s.x.reserve(width);
    s.y.reserve(width);
    for (char c : xs) {
      if (c != '0' && c != '1')
        throw std::runtime_error("ca_load_dataset: non-binary character");
      s.x.push_back(c == '1' ? 1.0 : 0.0);
    }
    for (char c : ys) {
      if (c != '0' && c != '1')
        throw std::runtime_error("ca_load_dataset: non-binary character");
      s.y.push_back(c == '1' ? 1.0 : 0.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

CaEvalResult ca_evaluate(const DeepTensorNetwork& net,
                         std::span<const CaSample> samples) {
  CaEvalResult res;
  if (samples.empty()) return res;
  std::size_t exact = 0, cells = 0, cells_right = 0;
  for (const CaSample& s : samples) {
    const std::vector<double> pred = predict_sequence(net, s.x);
    bool all = true;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double bit = pred[j] >= 0.5 ? 1.0 : 0.0;
      const bool ok = bit == s.y[j];
      all &= ok;
      ++cells;
      cells_right += ok ? 1 : 0;
    }
    exact += all ? 1 : 0;
  }
  res.sequence_accuracy =
      static_cast<double>(exact) / static_cast<double>(samples.size());
  res.site_accuracy =
      static_cast<double>(cells_right) / static_cast<double>(cells);
  res.solved = exact == samples.size();
  return res;
}

}  // namespace dtn

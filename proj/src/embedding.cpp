#include "dtn/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace dtn {

Tensor embed(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::invalid_argument("embed: input outside [0,1]");
  return Tensor::from(Shape{2}, {x, 1.0 - x});
}

std::vector<Tensor> embed_sequence(std::span<const double> xs) {
  std::vector<Tensor> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(embed(x));
  return out;
}

double decode(const Tensor& psi) {
  if (psi.rank() != 1 || psi.size() != 2)
    throw std::invalid_argument("decode: expected a two-component vector");
  const double a = std::abs(psi[0]), b = std::abs(psi[1]);
  if (a + b == 0.0)
    throw std::runtime_error("decode: both components are zero");
  return a / (a + b);
}

NodeId embed_node(Tape& tape, double x) { return tape.input(embed(x)); }

std::vector<NodeId> embed_sequence_nodes(Tape& tape,
                                         std::span<const double> xs) {
  std::vector<NodeId> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(embed_node(tape, x));
  return out;
}

NodeId decode_node(Tape& tape, NodeId psi) {
  const Tensor& v = tape.val(psi);
  if (v.rank() != 1 || v.size() != 2)
    throw std::invalid_argument("decode: expected a two-component vector");
  if (std::abs(v[0]) + std::abs(v[1]) == 0.0)
    throw std::runtime_error("decode: both components are zero");
  NodeId mags = tape.abs(psi);
  NodeId p0 = tape.pick(mags, 0, 0);
  NodeId p1 = tape.pick(mags, 0, 1);
  return tape.div(p0, tape.add(p0, p1));
}

}  // namespace dtn

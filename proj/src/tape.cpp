#include "dtn/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dtn {

// ---- recording --------------------------------------------------------------

NodeId Tape::input(Tensor v) {
  Node n{};
  n.op = Op::kInput;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::param(const Tensor& v) {
  Node n{};
  n.op = Op::kParam;
  n.value = v;
  NodeId id = push(std::move(n));
  params_.push_back(id);
  return id;
}

NodeId Tape::contract(NodeId a, NodeId b,
                      std::initializer_list<AxisPair> pairs) {
  return contract(a, b, std::span<const AxisPair>(pairs.begin(), pairs.size()));
}

NodeId Tape::contract(NodeId a, NodeId b, std::span<const AxisPair> pairs) {
  Node n{};
  n.op = Op::kContract;
  n.in0 = a;
  n.in1 = b;
  n.npairs = static_cast<std::uint8_t>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    n.ax[i] = pairs[i].first;
    n.bx[i] = pairs[i].second;
  }
  n.value = dtn::contract(nodes_[a].value, nodes_[b].value, pairs);
  return push(std::move(n));
}

#define DTN_BINARY(NAME, OP_KIND, VALUE_EXPR)             \
  NodeId Tape::NAME(NodeId a, NodeId b) {                 \
    Node n{};                                             \
    n.op = Op::OP_KIND;                                   \
    n.in0 = a;                                            \
    n.in1 = b;                                            \
    n.value = VALUE_EXPR(nodes_[a].value, nodes_[b].value); \
    return push(std::move(n));                            \
  }

DTN_BINARY(add, kAdd, dtn::add)
DTN_BINARY(sub, kSub, dtn::sub)
DTN_BINARY(mul, kMul, dtn::mul)
DTN_BINARY(div, kDiv, dtn::div)
#undef DTN_BINARY

NodeId Tape::scale(NodeId a, double c) {
  Node n{};
  n.op = Op::kScale;
  n.in0 = a;
  n.c = c;
  n.value = dtn::scale(nodes_[a].value, c);
  return push(std::move(n));
}

static void expect_scalar(const Tensor& t, const char* what) {
  if (t.size() != 1)
    throw std::invalid_argument(std::string(what) + ": expected a scalar");
}

NodeId Tape::mul_scalar(NodeId a, NodeId s) {
  expect_scalar(nodes_[s].value, "mul_scalar");
  Node n{};
  n.op = Op::kMulScalar;
  n.in0 = a;
  n.in1 = s;
  n.value = dtn::scale(nodes_[a].value, nodes_[s].value[0]);
  return push(std::move(n));
}

NodeId Tape::div_scalar(NodeId a, NodeId s) {
  expect_scalar(nodes_[s].value, "div_scalar");
  Node n{};
  n.op = Op::kDivScalar;
  n.in0 = a;
  n.in1 = s;
  n.value = dtn::scale(nodes_[a].value, 1.0 / nodes_[s].value[0]);
  return push(std::move(n));
}

#define DTN_UNARY(NAME, OP_KIND, VALUE_EXPR)   \
  NodeId Tape::NAME(NodeId a) {                \
    Node n{};                                  \
    n.op = Op::OP_KIND;                        \
    n.in0 = a;                                 \
    n.value = VALUE_EXPR(nodes_[a].value);     \
    return push(std::move(n));                 \
  }

DTN_UNARY(sigmoid, kSigmoid, dtn::sigmoid)
DTN_UNARY(abs, kAbs, dtn::abs)
DTN_UNARY(exp, kExp, dtn::exp)
DTN_UNARY(log, kLog, dtn::log)
DTN_UNARY(exp2x2, kExp2x2, dtn::matrix_exp_2x2)
DTN_UNARY(softmax, kSoftmax, dtn::softmax)
#undef DTN_UNARY

NodeId Tape::log_sum_exp(NodeId v) {
  Node n{};
  n.op = Op::kLogSumExp;
  n.in0 = v;
  n.value = Tensor::scalar(dtn::log_sum_exp(nodes_[v].value));
  return push(std::move(n));
}

NodeId Tape::frobenius_norm(NodeId a) {
  Node n{};
  n.op = Op::kFrobNorm;
  n.in0 = a;
  n.value = Tensor::scalar(dtn::frobenius_norm(nodes_[a].value));
  return push(std::move(n));
}

NodeId Tape::sum_squares(NodeId a) {
  Node n{};
  n.op = Op::kSumSquares;
  n.in0 = a;
  n.value = Tensor::scalar(dtn::sum_squares(nodes_[a].value));
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, Shape s) {
  Node n{};
  n.op = Op::kReshape;
  n.in0 = a;
  n.value = dtn::reshape(nodes_[a].value, s);
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a, std::span<const std::uint8_t> perm) {
  Node n{};
  n.op = Op::kTranspose;
  n.in0 = a;
  for (std::size_t i = 0; i < perm.size(); ++i) n.ax[i] = perm[i];
  n.value = dtn::transpose(nodes_[a].value, perm);
  return push(std::move(n));
}

NodeId Tape::pick(NodeId a, std::size_t axis, std::size_t index) {
  Node n{};
  n.op = Op::kPick;
  n.in0 = a;
  n.bx[0] = static_cast<std::uint8_t>(axis);
  n.index = static_cast<std::uint32_t>(index);
  n.value = dtn::pick(nodes_[a].value, axis, index);
  return push(std::move(n));
}

NodeId Tape::stack(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::stack: no inputs");
  Node n{};
  n.op = Op::kStack;
  n.aux_begin = static_cast<std::uint32_t>(aux_.size());
  n.aux_count = static_cast<std::uint32_t>(parts.size());
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  for (NodeId id : parts) {
    aux_.push_back(id);
    vals.push_back(nodes_[id].value);
  }
  n.value = dtn::stack(vals);
  return push(std::move(n));
}

NodeId Tape::sum_n(std::span<const NodeId> terms) {
  if (terms.empty()) throw std::invalid_argument("Tape::sum_n: no inputs");
  Node n{};
  n.op = Op::kSumN;
  n.aux_begin = static_cast<std::uint32_t>(aux_.size());
  n.aux_count = static_cast<std::uint32_t>(terms.size());
  Tensor total = nodes_[terms[0]].value;
  aux_.push_back(terms[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total += nodes_[terms[i]].value;
    aux_.push_back(terms[i]);
  }
  n.value = std::move(total);
  return push(std::move(n));
}

// ---- backward ----------------------------------------------------------------

Tensor& Tape::grad_acc(NodeId id, const Shape& s) {
  Tensor& g = grads_[id];
  if (g.null()) g.resize(s);
  return g;
}

const Tensor& Tape::param_grad(std::size_t i) const {
  return grads_[params_[i]];
}

// Gradients of a contraction, expressed as contractions of the upstream
// gradient with the other operand, followed by an axis permutation back into
// the operand's original order.
void Tape::backward_contract(const Node& n) {
  const Tensor& g = grads_[&n - nodes_.data()];
  const Tensor& a = nodes_[n.in0].value;
  const Tensor& b = nodes_[n.in1].value;
  const std::size_t np = n.npairs;

  bool used_a[4] = {false, false, false, false};
  bool used_b[4] = {false, false, false, false};
  for (std::size_t i = 0; i < np; ++i) {
    used_a[n.ax[i]] = true;
    used_b[n.bx[i]] = true;
  }
  std::uint8_t fa[4], fb[4];
  std::size_t nfa = 0, nfb = 0;
  for (std::uint8_t i = 0; i < a.rank(); ++i)
    if (!used_a[i]) fa[nfa++] = i;
  for (std::uint8_t i = 0; i < b.rank(); ++i)
    if (!used_b[i]) fb[nfb++] = i;

  // d/da: contract g's b-free block with b's free axes. Result axes are
  // (a-free in order, b-paired axes in ascending b order); permute to a's
  // axis order.
  {
    AxisPair ps[4];
    for (std::size_t i = 0; i < nfb; ++i)
      ps[i] = {static_cast<std::uint8_t>(nfa + i), fb[i]};
    Tensor ga = dtn::contract(g, b, std::span<const AxisPair>(ps, nfb));

    // walk b's paired axes in ascending order, recording each one's partner
    // axis in a
    std::uint8_t partner_in_a[4];
    std::size_t nbp = 0;
    for (std::uint8_t i = 0; i < b.rank(); ++i)
      if (used_b[i]) {
        for (std::size_t t = 0; t < np; ++t)
          if (n.bx[t] == i) partner_in_a[nbp] = n.ax[t];
        ++nbp;
      }
    std::uint8_t perm[4];
    bool ident = true;
    for (std::uint8_t ax = 0; ax < a.rank(); ++ax) {
      std::uint8_t src = 0;
      if (!used_a[ax]) {
        for (std::size_t i = 0; i < nfa; ++i)
          if (fa[i] == ax) src = static_cast<std::uint8_t>(i);
      } else {
        for (std::size_t i = 0; i < nbp; ++i)
          if (partner_in_a[i] == ax) src = static_cast<std::uint8_t>(nfa + i);
      }
      perm[ax] = src;
      ident &= src == ax;
    }
    if (!ident)
      ga = dtn::transpose(ga, std::span<const std::uint8_t>(perm, a.rank()));
    grad_acc(n.in0, a.shape()) += ga;
  }

  // d/db: contract a's free axes with g's leading block. Result axes are
  // (a-paired axes in ascending a order, b-free in order).
  {
    AxisPair ps[4];
    for (std::size_t i = 0; i < nfa; ++i)
      ps[i] = {fa[i], static_cast<std::uint8_t>(i)};
    Tensor gb = dtn::contract(a, g, std::span<const AxisPair>(ps, nfa));

    std::uint8_t partner_in_b[4];
    std::size_t nap = 0;
    for (std::uint8_t i = 0; i < a.rank(); ++i)
      if (used_a[i]) {
        for (std::size_t t = 0; t < np; ++t)
          if (n.ax[t] == i) partner_in_b[nap] = n.bx[t];
        ++nap;
      }
    std::uint8_t perm[4];
    bool ident = true;
    for (std::uint8_t bxx = 0; bxx < b.rank(); ++bxx) {
      std::uint8_t src = 0;
      if (used_b[bxx]) {
        for (std::size_t i = 0; i < nap; ++i)
          if (partner_in_b[i] == bxx) src = static_cast<std::uint8_t>(i);
      } else {
        for (std::size_t i = 0; i < nfb; ++i)
          if (fb[i] == bxx) src = static_cast<std::uint8_t>(nap + i);
      }
      perm[bxx] = src;
      ident &= src == bxx;
    }
    if (!ident)
      gb = dtn::transpose(gb, std::span<const std::uint8_t>(perm, b.rank()));
    grad_acc(n.in1, b.shape()) += gb;
  }
}

void Tape::backward(NodeId root) {
  if (nodes_[root].value.size() != 1)
    throw std::invalid_argument("Tape::backward: root must hold one element");
  grads_.assign(nodes_.size(), Tensor{});
  grads_[root].resize(nodes_[root].value.shape());
  grads_[root].fill(1.0);

  for (NodeId id = root + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    const Tensor& g = grads_[id];
    if (g.null()) continue;

    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        break;

      case Op::kContract:
        backward_contract(n);
        break;

      case Op::kAdd:
        grad_acc(n.in0, g.shape()) += g;
        grad_acc(n.in1, g.shape()) += g;
        break;

      case Op::kSub:
        grad_acc(n.in0, g.shape()) += g;
        grad_acc(n.in1, g.shape()) -= g;
        break;

      case Op::kMul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        Tensor& ga = grad_acc(n.in0, a.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        Tensor& gb = grad_acc(n.in1, b.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        break;
      }

      case Op::kDiv: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        const Tensor& y = n.value;
        Tensor& ga = grad_acc(n.in0, a.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b[i];
        Tensor& gb = grad_acc(n.in1, b.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * y[i] / b[i];
        break;
      }

      case Op::kScale: {
        Tensor& ga = grad_acc(n.in0, g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c;
        break;
      }

      case Op::kMulScalar: {
        const Tensor& a = nodes_[n.in0].value;
        const double s = nodes_[n.in1].value[0];
        Tensor& ga = grad_acc(n.in0, a.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        grad_acc(n.in1, nodes_[n.in1].value.shape())[0] += dtn::dot(g, a);
        break;
      }

      case Op::kDivScalar: {
        const Tensor& a = nodes_[n.in0].value;
        const double s = nodes_[n.in1].value[0];
        Tensor& ga = grad_acc(n.in0, a.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / s;
        grad_acc(n.in1, nodes_[n.in1].value.shape())[0] -=
            dtn::dot(g, a) / (s * s);
        break;
      }

      case Op::kSigmoid: {
        const Tensor& y = n.value;
        Tensor& ga = grad_acc(n.in0, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }

      case Op::kAbs: {
        const Tensor& x = nodes_[n.in0].value;
        Tensor& ga = grad_acc(n.in0, x.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
        break;
      }

      case Op::kExp: {
        const Tensor& y = n.value;
        Tensor& ga = grad_acc(n.in0, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        break;
      }

      case Op::kLog: {
        const Tensor& x = nodes_[n.in0].value;
        Tensor& ga = grad_acc(n.in0, x.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
        break;
      }

      case Op::kExp2x2: {
        // E = e^tau (ch(q) I + sh(q) (h - tau I)); chain through tau(h),
        // q(h) = tau^2 - det(h), and the direct h term.
        const Tensor& h = nodes_[n.in0].value;
        const Tensor& E = n.value;
        const double a = h.at(0, 0), b = h.at(0, 1), c = h.at(1, 0),
                     d = h.at(1, 1);
        const double tau = 0.5 * (a + d);
        const double q = tau * tau - (a * d - b * c);
        const double et = std::exp(tau);
        const double sh = entire_sinhc(q);
        const double shd = entire_sinhc_deriv(q);
        const double m00 = a - tau, m11 = d - tau;
        const double tr_g = g.at(0, 0) + g.at(1, 1);
        const double g_m = g.at(0, 0) * m00 + g.at(0, 1) * b + g.at(1, 0) * c +
                           g.at(1, 1) * m11;
        const double g_tau = dtn::dot(g, E) - et * sh * tr_g;
        const double g_q = et * (tr_g * 0.5 * sh + g_m * shd);
        Tensor& gh = grad_acc(n.in0, h.shape());
        gh.at(0, 0) += et * sh * g.at(0, 0) + 0.5 * g_tau + g_q * (tau - d);
        gh.at(0, 1) += et * sh * g.at(0, 1) + g_q * c;
        gh.at(1, 0) += et * sh * g.at(1, 0) + g_q * b;
        gh.at(1, 1) += et * sh * g.at(1, 1) + 0.5 * g_tau + g_q * (tau - a);
        break;
      }

      case Op::kSoftmax: {
        const Tensor& y = n.value;
        const double gy = dtn::dot(g, y);
        Tensor& ga = grad_acc(n.in0, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += y[i] * (g[i] - gy);
        break;
      }

      case Op::kLogSumExp: {
        Tensor p = dtn::softmax(nodes_[n.in0].value);
        Tensor& ga = grad_acc(n.in0, p.shape());
        for (std::size_t i = 0; i < p.size(); ++i) ga[i] += g[0] * p[i];
        break;
      }

      case Op::kFrobNorm: {
        const Tensor& x = nodes_[n.in0].value;
        const double norm = n.value[0];
        if (norm > 0.0) {
          Tensor& ga = grad_acc(n.in0, x.shape());
          const double s = g[0] / norm;
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += s * x[i];
        }
        break;
      }

      case Op::kSumSquares: {
        const Tensor& x = nodes_[n.in0].value;
        Tensor& ga = grad_acc(n.in0, x.shape());
        const double s = 2.0 * g[0];
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += s * x[i];
        break;
      }

      case Op::kReshape: {
        const Shape& s = nodes_[n.in0].value.shape();
        grad_acc(n.in0, s) += dtn::reshape(g, s);
        break;
      }

      case Op::kTranspose: {
        const Tensor& x = nodes_[n.in0].value;
        std::uint8_t inv[4];
        for (std::size_t i = 0; i < x.rank(); ++i) inv[n.ax[i]] = i;
        grad_acc(n.in0, x.shape()) +=
            dtn::transpose(g, std::span<const std::uint8_t>(inv, x.rank()));
        break;
      }

      case Op::kPick: {
        const Tensor& x = nodes_[n.in0].value;
        Tensor& ga = grad_acc(n.in0, x.shape());
        const std::size_t axis = n.bx[0];
        std::size_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
        for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
        const std::size_t dim = x.shape()[axis];
        for (std::size_t o = 0; o < outer; ++o) {
          double* dst = ga.data() + (o * dim + n.index) * inner;
          const double* src = g.data() + o * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
        break;
      }

      case Op::kStack: {
        const std::size_t block = g.size() / n.aux_count;
        for (std::uint32_t p = 0; p < n.aux_count; ++p) {
          NodeId part = aux_[n.aux_begin + p];
          Tensor& gp = grad_acc(part, nodes_[part].value.shape());
          const double* src = g.data() + p * block;
          for (std::size_t i = 0; i < block; ++i) gp[i] += src[i];
        }
        break;
      }

      case Op::kSumN: {
        for (std::uint32_t p = 0; p < n.aux_count; ++p) {
          NodeId term = aux_[n.aux_begin + p];
          grad_acc(term, g.shape()) += g;
        }
        break;
      }
    }
  }

  // Untouched parameters report a zero gradient rather than a null tensor.
  for (NodeId pid : params_)
    if (grads_[pid].null()) grads_[pid].resize(nodes_[pid].value.shape());
}

void Tape::reset() {
  nodes_.clear();
  params_.clear();
  aux_.clear();
  grads_.clear();
}

}  // namespace dtn

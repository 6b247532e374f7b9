#include "dtn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dtn {

// ---- Shape -----------------------------------------------------------------

Shape::Shape(std::initializer_list<std::size_t> dims) {
  if (dims.size() > 4) throw std::invalid_argument("Shape: rank > 4");
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("Shape: zero dimension");
    dim[rank++] = static_cast<std::uint32_t>(d);
  }
}

Shape Shape::of(std::span<const std::size_t> dims) {
  Shape s;
  if (dims.size() > 4) throw std::invalid_argument("Shape: rank > 4");
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("Shape: zero dimension");
    s.dim[s.rank++] = static_cast<std::uint32_t>(d);
  }
  return s;
}

std::string Shape::str() const {
  std::string out = "[";
  for (std::uint8_t i = 0; i < rank; ++i) {
    if (i) out += ",";
    out += std::to_string(dim[i]);
  }
  return out + "]";
}

// ---- Tensor ----------------------------------------------------------------

void Tensor::resize(Shape s) {
  shape_ = s;
  size_ = s.size();
  present_ = true;
  if (size_ > kInline) {
    heap_.assign(size_, 0.0);
  } else {
    heap_.clear();
    small_.fill(0.0);
  }
}

void Tensor::fill(double v) {
  double* p = data();
  std::fill(p, p + size_, v);
}

Tensor Tensor::scalar(double v) {
  Tensor t{Shape{}};
  t[0] = v;
  return t;
}

Tensor Tensor::from(Shape s, std::initializer_list<double> v) {
  Tensor t{s};
  if (v.size() != t.size())
    throw std::invalid_argument("Tensor::from: wrong element count for " +
                                s.str());
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t{Shape{n, n}};
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

static void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape().str() + " vs " + b.shape().str());
}

Tensor& Tensor::operator+=(const Tensor& o) {
  check_same_shape(*this, o, "operator+=");
  double* p = data();
  const double* q = o.data();
  for (std::size_t i = 0; i < size_; ++i) p[i] += q[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  check_same_shape(*this, o, "operator-=");
  double* p = data();
  const double* q = o.data();
  for (std::size_t i = 0; i < size_; ++i) p[i] -= q[i];
  return *this;
}

Tensor& Tensor::operator*=(double c) {
  double* p = data();
  for (std::size_t i = 0; i < size_; ++i) p[i] *= c;
  return *this;
}

// ---- gemm kernels ----------------------------------------------------------

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      if (accumulate)
        c[i * n + j] += s;
      else
        c[i * n + j] = s;
    }
  }
}

void gemm_tt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[j * k + p];
      if (accumulate)
        c[i * n + j] += s;
      else
        c[i * n + j] = s;
    }
  }
}

// ---- transpose / reshape / slicing ----------------------------------------

Tensor transpose(const Tensor& a, std::span<const std::uint8_t> perm) {
  const std::size_t r = a.rank();
  if (perm.size() != r) throw std::invalid_argument("transpose: bad perm size");
  bool seen[4] = {false, false, false, false};
  Shape out_shape;
  out_shape.rank = static_cast<std::uint8_t>(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || seen[perm[i]])
      throw std::invalid_argument("transpose: invalid permutation");
    seen[perm[i]] = true;
    out_shape.dim[i] = static_cast<std::uint32_t>(a.shape()[perm[i]]);
  }
  Tensor out{out_shape};

  // Strides of the source, re-ordered so that walking the output in row-major
  // order advances the right source axes.
  std::size_t src_stride[4] = {0, 0, 0, 0};
  {
    std::size_t s = 1;
    std::size_t tmp[4];
    for (std::size_t i = r; i-- > 0;) {
      tmp[i] = s;
      s *= a.shape()[i];
    }
    for (std::size_t i = 0; i < r; ++i) src_stride[i] = tmp[perm[i]];
  }
  std::size_t n0 = r > 0 ? out_shape[0] : 1, n1 = r > 1 ? out_shape[1] : 1,
              n2 = r > 2 ? out_shape[2] : 1, n3 = r > 3 ? out_shape[3] : 1;
  double* dst = out.data();
  const double* src = a.data();
  std::size_t w = 0;
  for (std::size_t i0 = 0; i0 < n0; ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1)
      for (std::size_t i2 = 0; i2 < n2; ++i2)
        for (std::size_t i3 = 0; i3 < n3; ++i3)
          dst[w++] = src[i0 * src_stride[0] + i1 * src_stride[1] +
                         i2 * src_stride[2] + i3 * src_stride[3]];
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: expected rank 2");
  static constexpr std::uint8_t kSwap[2] = {1, 0};
  return transpose(a, kSwap);
}

Tensor reshape(const Tensor& a, Shape s) {
  if (s.size() != a.size())
    throw std::invalid_argument("reshape: size mismatch " + a.shape().str() +
                                " -> " + s.str());
  Tensor out{s};
  std::copy(a.data(), a.data() + a.size(), out.data());
  return out;
}

Tensor pick(const Tensor& a, std::size_t axis, std::size_t index) {
  if (axis >= a.rank()) throw std::invalid_argument("pick: bad axis");
  if (index >= a.shape()[axis]) throw std::invalid_argument("pick: bad index");
  Shape s;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis) s.dim[s.rank++] = static_cast<std::uint32_t>(a.shape()[i]);
  Tensor out{s};
  // outer = product of axes before `axis`, inner = product after.
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
  const std::size_t d = a.shape()[axis];
  const double* src = a.data();
  double* dst = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(dst + o * inner, src + (o * d + index) * inner,
                inner * sizeof(double));
  return out;
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no inputs");
  const Shape inner = parts[0].shape();
  if (inner.rank >= 4) throw std::invalid_argument("stack: rank would exceed 4");
  Shape s;
  s.rank = static_cast<std::uint8_t>(inner.rank + 1);
  s.dim[0] = static_cast<std::uint32_t>(parts.size());
  for (std::uint8_t i = 0; i < inner.rank; ++i) s.dim[i + 1] = inner.dim[i];
  Tensor out{s};
  const std::size_t block = inner.size();
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].shape() != inner)
      throw std::invalid_argument("stack: mismatched part shapes");
    std::memcpy(out.data() + p * block, parts[p].data(),
                block * sizeof(double));
  }
  return out;
}

// ---- contraction -----------------------------------------------------------

namespace {

// One operand of a contraction, lowered to a matrix. The paired axes become
// the K side. When the paired axes already sit contiguously at the front or
// back of the operand (in pair order), the original buffer is used directly,
// possibly in transposed view; otherwise the operand is permuted into a
// scratch tensor. The network's hot contractions are all arranged to hit the
// no-copy paths.
struct MatView {
  const double* ptr = nullptr;
  bool trans = false;  // false: [rows=free, K]; true: [K, free] in memory
  Tensor scratch;
};

MatView lower_operand(const Tensor& t, std::span<const std::uint8_t> paired,
                      std::span<const std::uint8_t> free_axes,
                      bool pairs_lead_result) {
  const std::size_t r = t.rank(), p = paired.size();
  bool prefix = true, suffix = true;
  for (std::size_t i = 0; i < p; ++i) {
    prefix &= paired[i] == i;
    suffix &= paired[i] == r - p + i;
  }
  MatView v;
  if (suffix && !pairs_lead_result) {
    v.ptr = t.data();  // [free..., K]
  } else if (prefix && !pairs_lead_result) {
    v.ptr = t.data();  // [K, free...]
    v.trans = true;
  } else if (prefix && pairs_lead_result) {
    v.ptr = t.data();  // [K, free...] is exactly what the right side wants
  } else if (suffix && pairs_lead_result) {
    v.ptr = t.data();  // [free..., K] viewed as transposed right side
    v.trans = true;
  } else {
    std::uint8_t perm[4];
    std::size_t w = 0;
    if (pairs_lead_result) {
      for (std::uint8_t ax : paired) perm[w++] = ax;
      for (std::uint8_t ax : free_axes) perm[w++] = ax;
    } else {
      for (std::uint8_t ax : free_axes) perm[w++] = ax;
      for (std::uint8_t ax : paired) perm[w++] = ax;
    }
    v.scratch = transpose(t, std::span<const std::uint8_t>(perm, r));
    v.ptr = v.scratch.data();
  }
  return v;
}

}  // namespace

Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const AxisPair> pairs) {
  if (a.null() || b.null()) throw std::invalid_argument("contract: null input");
  std::uint8_t pa[4], pb[4];
  bool used_a[4] = {false, false, false, false};
  bool used_b[4] = {false, false, false, false};
  const std::size_t np = pairs.size();
  if (np > 4) throw std::invalid_argument("contract: too many pairs");
  std::size_t kdim = 1;
  for (std::size_t i = 0; i < np; ++i) {
    const auto [ax, bx] = pairs[i];
    if (ax >= a.rank() || bx >= b.rank())
      throw std::invalid_argument("contract: axis out of range");
    if (used_a[ax] || used_b[bx])
      throw std::invalid_argument("contract: repeated axis");
    if (a.shape()[ax] != b.shape()[bx])
      throw std::invalid_argument("contract: paired dims differ, " +
                                  a.shape().str() + " axis " +
                                  std::to_string(ax) + " vs " +
                                  b.shape().str() + " axis " +
                                  std::to_string(bx));
    used_a[ax] = used_b[bx] = true;
    pa[i] = ax;
    pb[i] = bx;
    kdim *= a.shape()[ax];
  }

  std::uint8_t fa[4], fb[4];
  std::size_t nfa = 0, nfb = 0, m = 1, n = 1;
  Shape out_shape;
  for (std::uint8_t i = 0; i < a.rank(); ++i)
    if (!used_a[i]) {
      fa[nfa++] = i;
      m *= a.shape()[i];
      if (out_shape.rank == 4)
        throw std::invalid_argument("contract: result rank > 4");
      out_shape.dim[out_shape.rank++] = static_cast<std::uint32_t>(a.shape()[i]);
    }
  for (std::uint8_t i = 0; i < b.rank(); ++i)
    if (!used_b[i]) {
      fb[nfb++] = i;
      n *= b.shape()[i];
      if (out_shape.rank == 4)
        throw std::invalid_argument("contract: result rank > 4");
      out_shape.dim[out_shape.rank++] = static_cast<std::uint32_t>(b.shape()[i]);
    }

  MatView va = lower_operand(a, {pa, np}, {fa, nfa}, /*pairs_lead_result=*/false);
  MatView vb = lower_operand(b, {pb, np}, {fb, nfb}, /*pairs_lead_result=*/true);

  Tensor out{out_shape};
  if (!va.trans && !vb.trans)
    gemm_nn(va.ptr, vb.ptr, out.data(), m, kdim, n, false);
  else if (va.trans && !vb.trans)
    gemm_tn(va.ptr, vb.ptr, out.data(), m, kdim, n, false);
  else if (!va.trans && vb.trans)
    gemm_nt(va.ptr, vb.ptr, out.data(), m, kdim, n, false);
  else
    gemm_tt(va.ptr, vb.ptr, out.data(), m, kdim, n, false);
  return out;
}

Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<AxisPair> pairs) {
  return contract(a, b, std::span<const AxisPair>(pairs.begin(), pairs.size()));
}

// ---- elementwise and reductions ---------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  out += b;
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  out -= b;
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a;
  double* p = out.data();
  const double* q = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] *= q[i];
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out = a;
  double* p = out.data();
  const double* q = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] /= q[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  out *= c;
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-p[i]));
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::abs(p[i]);
  return out;
}

Tensor exp(const Tensor& a) {
  Tensor out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::exp(p[i]);
  return out;
}

Tensor log(const Tensor& a) {
  Tensor out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::log(p[i]);
  return out;
}

double sum_squares(const Tensor& a) {
  const double* p = a.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
  return s;
}

double frobenius_norm(const Tensor& a) { return std::sqrt(sum_squares(a)); }

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  const double* p = a.data();
  const double* q = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * q[i];
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  const double* p = a.data();
  const double* q = b.data();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(p[i] - q[i]));
  return m;
}

// ---- 2x2 matrix exponential --------------------------------------------------

double entire_cosh(double q) {
  return q >= 0.0 ? std::cosh(std::sqrt(q)) : std::cos(std::sqrt(-q));
}

double entire_sinhc(double q) {
  // sinh(sqrt q)/sqrt q, continued through q = 0 by its power series once
  // sqrt|q| drops below 1e-8.
  if (std::abs(q) < 1e-16) return 1.0 + q / 6.0 + q * q / 120.0;
  if (q > 0.0) {
    const double r = std::sqrt(q);
    return std::sinh(r) / r;
  }
  const double r = std::sqrt(-q);
  return std::sin(r) / r;
}

double entire_sinhc_deriv(double q) {
  // (ch(q) - sh(q)) / (2q); the difference cancels near zero, so a wider
  // series window than the value itself.
  if (std::abs(q) < 1e-6)
    return 1.0 / 6.0 + q / 60.0 + q * q / 1680.0;
  return (entire_cosh(q) - entire_sinhc(q)) / (2.0 * q);
}

Tensor matrix_exp_2x2(const Tensor& h) {
  if (h.rank() != 2 || h.shape()[0] != 2 || h.shape()[1] != 2)
    throw std::invalid_argument("matrix_exp_2x2: expected a 2x2 matrix");
  const double a = h.at(0, 0), b = h.at(0, 1), c = h.at(1, 0), d = h.at(1, 1);
  const double tau = 0.5 * (a + d);
  const double det = a * d - b * c;
  const double q = tau * tau - det;
  const double et = std::exp(tau);
  const double ch = entire_cosh(q), sh = entire_sinhc(q);
  Tensor out{Shape{2, 2}};
  out.at(0, 0) = et * (ch + sh * (a - tau));
  out.at(0, 1) = et * sh * b;
  out.at(1, 0) = et * sh * c;
  out.at(1, 1) = et * (ch + sh * (d - tau));
  return out;
}

// ---- softmax ----------------------------------------------------------------

Tensor softmax(const Tensor& v) {
  if (v.rank() != 1) throw std::invalid_argument("softmax: expected rank 1");
  Tensor out = v;
  double* p = out.data();
  double mx = p[0];
  for (std::size_t i = 1; i < out.size(); ++i) mx = std::max(mx, p[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    p[i] = std::exp(p[i] - mx);
    z += p[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) p[i] /= z;
  return out;
}

double log_sum_exp(const Tensor& v) {
  if (v.rank() != 1) throw std::invalid_argument("log_sum_exp: expected rank 1");
  const double* p = v.data();
  double mx = p[0];
  for (std::size_t i = 1; i < v.size(); ++i) mx = std::max(mx, p[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += std::exp(p[i] - mx);
  return mx + std::log(z);
}

}  // namespace dtn

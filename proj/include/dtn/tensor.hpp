#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dtn {

// Shape of a tensor of rank <= 4. Everything in the network is a scalar, a
// vector, a matrix, or a four-index core, so a fixed-capacity shape avoids
// a heap allocation per node in the autodiff tape.
struct Shape {
  std::array<std::uint32_t, 4> dim{};
  std::uint8_t rank = 0;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  static Shape of(std::span<const std::size_t> dims);

  std::size_t size() const {
    std::size_t n = 1;
    for (std::uint8_t i = 0; i < rank; ++i) n *= dim[i];
    return n;
  }
  std::size_t operator[](std::size_t i) const { return dim[i]; }
  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (std::uint8_t i = 0; i < rank; ++i)
      if (dim[i] != o.dim[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

// Dense row-major tensor over double, rank <= 4. Values up to kInline
// elements live inside the object; training tapes allocate thousands of
// small tensors per batch and the inline buffer keeps them off the heap.
// A default-constructed Tensor is "null" (no shape, no data) and is used
// as the not-yet-accumulated state for gradients.
class Tensor {
public:
  static constexpr std::size_t kInline = 16;

  Tensor() = default;
  explicit Tensor(Shape s) { resize(s); }

  static Tensor scalar(double v);
  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor from(Shape s, std::initializer_list<double> v);
  static Tensor identity(std::size_t n);

  bool null() const { return !present_; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank; }
  std::size_t size() const { return size_; }

  double* data() { return size_ <= kInline ? small_.data() : heap_.data(); }
  const double* data() const {
    return size_ <= kInline ? small_.data() : heap_.data();
  }

  double& operator[](std::size_t i) { return data()[i]; }
  double operator[](std::size_t i) const { return data()[i]; }

  // Multi-index access, mostly for construction and tests; hot loops index
  // flat through data().
  double& at(std::size_t i0) { return data()[i0]; }
  double& at(std::size_t i0, std::size_t i1) {
    return data()[i0 * shape_.dim[1] + i1];
  }
  double& at(std::size_t i0, std::size_t i1, std::size_t i2) {
    return data()[(i0 * shape_.dim[1] + i1) * shape_.dim[2] + i2];
  }
  double& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
    return data()[((i0 * shape_.dim[1] + i1) * shape_.dim[2] + i2) *
                      shape_.dim[3] +
                  i3];
  }
  double at(std::size_t i0) const { return data()[i0]; }
  double at(std::size_t i0, std::size_t i1) const {
    return data()[i0 * shape_.dim[1] + i1];
  }
  double at(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return data()[(i0 * shape_.dim[1] + i1) * shape_.dim[2] + i2];
  }
  double at(std::size_t i0, std::size_t i1, std::size_t i2,
            std::size_t i3) const {
    return data()[((i0 * shape_.dim[1] + i1) * shape_.dim[2] + i2) *
                      shape_.dim[3] +
                  i3];
  }

  void fill(double v);
  void resize(Shape s);  // discards contents, zero-fills

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double c);

private:
  Shape shape_{};
  std::size_t size_ = 0;
  bool present_ = false;
  std::array<double, kInline> small_{};
  std::vector<double> heap_;
};

// ---- value-level operations ------------------------------------------------
// These compute plain tensors; the tape records them and owns their VJPs.

using AxisPair = std::pair<std::uint8_t, std::uint8_t>;

// General tensor contraction: sums over the listed (axis of a, axis of b)
// pairs; result axes are a's free axes followed by b's free axes, each in
// original order. Paired dimensions must match.
Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const AxisPair> pairs);
Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<AxisPair> pairs);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);

Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);  // elementwise
Tensor log(const Tensor& a);  // elementwise

double frobenius_norm(const Tensor& a);
double sum_squares(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);

// exp(h) for a real 2x2 matrix, in closed form. With m = h - tau*I
// (tau the mean of the diagonal) and q = tau^2 - det(h),
//   exp(h) = e^tau * (ch(q) * I + sh(q) * m)
// where ch(q) = cosh(sqrt(q)) and sh(q) = sinh(sqrt(q))/sqrt(q) continue to
// cos/sin for q < 0 and to their power series near q = 0. Both are entire
// in q, so the formula has no branch issues.
double entire_cosh(double q);
double entire_sinhc(double q);
double entire_sinhc_deriv(double q);  // d/dq sinh(sqrt q)/sqrt q
Tensor matrix_exp_2x2(const Tensor& h);

Tensor softmax(const Tensor& v);      // rank-1, max-subtracted
double log_sum_exp(const Tensor& v);  // rank-1, max-subtracted

Tensor reshape(const Tensor& a, Shape s);
Tensor transpose(const Tensor& a, std::span<const std::uint8_t> perm);
Tensor transpose(const Tensor& a);  // rank-2 convenience
// Index one axis at a fixed position; result drops that axis.
Tensor pick(const Tensor& a, std::size_t axis, std::size_t index);
Tensor stack(std::span<const Tensor> parts);  // new leading axis

double max_abs_diff(const Tensor& a, const Tensor& b);

// ---- raw kernels -----------------------------------------------------------
// C[M,N] (+)= A.B with A either [M,K] or, when transposed, [K,M], and B
// either [K,N] or [N,K]. Plain loops; -O3 vectorizes them well enough for
// the bond dimensions this engine targets.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);
void gemm_tt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate);

}  // namespace dtn

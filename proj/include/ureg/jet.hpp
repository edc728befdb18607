#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ureg/errors.hpp"

namespace ureg {

// Build-time ceiling on the truncation order. Order 8 supports curvature
// derivatives up to nabla^6 R (metric jets of order 8).
inline constexpr int kMaxJetOrder = 8;
inline constexpr int kMaxJetDim = 8;

using MultiIndex = std::array<std::uint8_t, kMaxJetDim>;

// Shared immutable descriptor of the coefficient layout for jets in `dim`
// variables truncated at total degree `order`. Multi-indices are stored in
// graded order (by total degree, lexicographic within a degree); the product
// table maps coefficient-index pairs to the coefficient index of the summed
// multi-index.
class JetSpace {
 public:
  static std::shared_ptr<const JetSpace> get(int dim, int order);

  int dim() const { return dim_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(exponents_.size()); }

  const MultiIndex& exponent(int i) const { return exponents_[i]; }
  int degree(int i) const { return degree_[i]; }
  // First coefficient index of the given total degree.
  int degree_offset(int d) const { return degree_offset_[d]; }

  // Coefficient index of a multi-index, or -1 when |alpha| > order.
  int index_of(std::span<const int> alpha) const;

  // prod(i,j): index of exponent(i)+exponent(j); only valid when
  // degree(i)+degree(j) <= order.
  int prod(int i, int j) const { return prod_[static_cast<std::size_t>(i) * size_t_size() + j]; }

  // Index of exponent(i) + e_d, or -1 when that exceeds the order.
  int bump(int i, int d) const { return bump_[static_cast<std::size_t>(i) * dim_ + d]; }

  double factorial_alpha(int i) const { return fact_alpha_[i]; }

  // All ways of writing exponent(k) = exponent(i) + exponent(j); pairs (i,j).
  const std::vector<std::pair<int, int>>& splits(int k) const { return splits_[k]; }

 private:
  JetSpace(int dim, int order);
  std::size_t size_t_size() const { return exponents_.size(); }

  int dim_, order_;
  std::vector<MultiIndex> exponents_;
  std::vector<int> degree_;
  std::vector<int> degree_offset_;
  std::vector<int> prod_;
  std::vector<int> bump_;
  std::vector<double> fact_alpha_;
  std::vector<std::vector<std::pair<int, int>>> splits_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

// A scalar value together with all partial derivatives up to the space's
// truncation order, stored as Taylor coefficients c_alpha = d^alpha f / alpha!.
// Arithmetic is exact in exact arithmetic; all operations are pure.
class Jet {
 public:
  Jet() = default;
  Jet(JetSpacePtr space, double value);

  // The jet of the coordinate function x_{index+1} at base value `value`.
  static Jet variable(JetSpacePtr space, int index, double value);

  const JetSpacePtr& space() const { return space_; }
  int order() const { return space_->order(); }
  int dim() const { return space_->dim(); }

  double value() const { return c_[0]; }
  double coeff(int i) const { return c_[i]; }
  Eigen::VectorXd& coeffs() { return c_; }
  const Eigen::VectorXd& coeffs() const { return c_; }

  // d^alpha at the base point (Taylor coefficient times alpha!).
  double derivative(std::span<const int> alpha) const;

  // Gradient of the order-0 value (requires order >= 1).
  Eigen::VectorXd gradient() const;

  // Restriction to a lower truncation order.
  Jet truncated(int new_order) const;

  // Jet of the partial derivative with respect to coordinate d;
  // the result lives in the space of order-1 lower.
  Jet partial(int d) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator+=(double s);
  Jet& operator-=(double s);
  Jet& operator*=(double s);
  Jet& operator/=(double s);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double b) { return a += b; }
  friend Jet operator+(double a, Jet b) { return b += a; }
  friend Jet operator-(Jet a, double b) { return a -= b; }
  friend Jet operator-(double a, const Jet& b);
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double a, Jet b) { return b *= a; }
  friend Jet operator/(Jet a, double b) { return a /= b; }
  friend Jet operator/(double a, const Jet& b);
  friend Jet operator-(const Jet& a);
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);

  // Composition with a univariate analytic function given by its Taylor
  // coefficients at value(): f(a) truncated at the space order.
  Jet compose(std::span<const double> univariate_coeffs) const;

  friend Jet sqrt(const Jet& a);
  friend Jet sin(const Jet& a);
  friend Jet cos(const Jet& a);
  friend Jet exp(const Jet& a);
  friend Jet log(const Jet& a);
  friend Jet tanh(const Jet& a);
  friend Jet abs(const Jet& a);
  friend Jet inverse(const Jet& a);
  friend Jet pow(const Jet& a, const Jet& b);
  friend Jet pow_const(const Jet& a, double e);

 private:
  void check_same(const Jet& o) const;
  JetSpacePtr space_;
  Eigen::VectorXd c_;
};

// Evaluates all partial derivatives of e at `base` up to |alpha| <= order.
Jet eval_jet(const class Expr& e, std::span<const double> base, int order);

// --- kernel overloads used by Expr::eval<Jet> ------------------------------

inline Jet ev_add(Jet a, const Jet& b) { return a += b; }
inline Jet ev_sub(Jet a, const Jet& b) { return a -= b; }
inline Jet ev_mul(const Jet& a, const Jet& b) { return a * b; }
inline Jet ev_div(const Jet& a, const Jet& b) { return a / b; }
inline Jet ev_neg(const Jet& a) { return -a; }
inline Jet ev_sqrt(const Jet& a) { return sqrt(a); }
inline Jet ev_sin(const Jet& a) { return sin(a); }
inline Jet ev_cos(const Jet& a) { return cos(a); }
inline Jet ev_exp(const Jet& a) { return exp(a); }
inline Jet ev_log(const Jet& a) { return log(a); }
inline Jet ev_tanh(const Jet& a) { return tanh(a); }
inline Jet ev_abs(const Jet& a) { return abs(a); }
inline Jet ev_pow(const Jet& a, const Jet& b) { return pow(a, b); }
inline Jet ev_pow_const(const Jet& a, double e) { return pow_const(a, e); }
inline Jet ev_const_like(const Jet& proto, double v) { return Jet(proto.space(), v); }
bool ev_finite(const Jet& a);

}  // namespace ureg

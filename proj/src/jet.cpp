#include "ureg/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "ureg/expr.hpp"

namespace ureg {

namespace {

void enumerate_exponents(int dim, int order, std::vector<MultiIndex>& out) {
  // Graded order: by total degree, lexicographic within a degree.
  MultiIndex cur{};
  for (int d = 0; d <= order; ++d) {
    // Enumerate compositions of d into dim parts, lexicographically.
    std::vector<int> a(dim, 0);
    a[dim - 1] = d;
    // Start from (0,...,0,d) and iterate in colex-ish order; we instead build
    // recursively for clarity.
    struct Rec {
      int dim, target;
      std::vector<MultiIndex>& out;
      MultiIndex cur;
      void run(int pos, int left) {
        if (pos == dim - 1) {
          cur[pos] = static_cast<std::uint8_t>(left);
          out.push_back(cur);
          return;
        }
        for (int k = left; k >= 0; --k) {
          cur[pos] = static_cast<std::uint8_t>(k);
          run(pos + 1, left - k);
        }
      }
    } rec{dim, d, out, cur};
    rec.run(0, d);
  }
}

std::uint64_t pack(const MultiIndex& m, int dim) {
  std::uint64_t key = 0;
  for (int i = 0; i < dim; ++i) key = (key << 8) | m[i];
  return key;
}

}  // namespace

JetSpace::JetSpace(int dim, int order) : dim_(dim), order_(order) {
  enumerate_exponents(dim, order, exponents_);
  const int n = static_cast<int>(exponents_.size());
  degree_.resize(n);
  degree_offset_.assign(order + 2, n);
  std::map<std::uint64_t, int> lookup;
  for (int i = 0; i < n; ++i) {
    int d = 0;
    for (int k = 0; k < dim; ++k) d += exponents_[i][k];
    degree_[i] = d;
    if (degree_offset_[d] == n) degree_offset_[d] = i;
    lookup[pack(exponents_[i], dim)] = i;
  }
  for (int d = order; d >= 0; --d)
    if (degree_offset_[d] == n) degree_offset_[d] = degree_offset_[d + 1];

  prod_.assign(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (degree_[i] + degree_[j] > order) continue;
      MultiIndex s{};
      for (int k = 0; k < dim; ++k) s[k] = static_cast<std::uint8_t>(exponents_[i][k] + exponents_[j][k]);
      prod_[static_cast<std::size_t>(i) * n + j] = lookup.at(pack(s, dim));
    }
  }

  bump_.assign(static_cast<std::size_t>(n) * dim, -1);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      if (degree_[i] + 1 > order) continue;
      MultiIndex s = exponents_[i];
      s[d] = static_cast<std::uint8_t>(s[d] + 1);
      bump_[static_cast<std::size_t>(i) * dim + d] = lookup.at(pack(s, dim));
    }
  }

  fact_alpha_.resize(n);
  for (int i = 0; i < n; ++i) {
    double f = 1.0;
    for (int k = 0; k < dim; ++k)
      for (int v = 2; v <= exponents_[i][k]; ++v) f *= v;
    fact_alpha_[i] = f;
  }

  splits_.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int k = prod_[static_cast<std::size_t>(i) * n + j];
      if (k >= 0) splits_[k].push_back({i, j});
    }
}

std::shared_ptr<const JetSpace> JetSpace::get(int dim, int order) {
  if (dim < 1 || dim > kMaxJetDim) throw Error("jet dimension out of range");
  if (order < 0 || order > kMaxJetOrder)
    throw Error("jet order " + std::to_string(order) + " exceeds the configured maximum " +
                std::to_string(kMaxJetOrder));
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{dim, order}];
  if (!slot) slot = std::shared_ptr<const JetSpace>(new JetSpace(dim, order));
  return slot;
}

int JetSpace::index_of(std::span<const int> alpha) const {
  if (static_cast<int>(alpha.size()) != dim_) throw Error("multi-index dimension mismatch");
  int deg = 0;
  for (int v : alpha) {
    if (v < 0) throw Error("negative multi-index entry");
    deg += v;
  }
  if (deg > order_) return -1;
  for (int i = degree_offset_[deg]; i < degree_offset_[deg + 1]; ++i) {
    bool match = true;
    for (int k = 0; k < dim_; ++k)
      if (exponents_[i][k] != alpha[k]) {
        match = false;
        break;
      }
    if (match) return i;
  }
  return -1;
}

Jet::Jet(JetSpacePtr space, double value) : space_(std::move(space)) {
  c_ = Eigen::VectorXd::Zero(space_->size());
  c_[0] = value;
}

Jet Jet::variable(JetSpacePtr space, int index, double value) {
  if (index < 0 || index >= space->dim()) throw Error("jet variable index out of range");
  Jet j(space, value);
  if (space->order() >= 1) {
    std::vector<int> alpha(space->dim(), 0);
    alpha[index] = 1;
    j.c_[space->index_of(alpha)] = 1.0;
  }
  return j;
}

double Jet::derivative(std::span<const int> alpha) const {
  const int i = space_->index_of(alpha);
  if (i < 0) throw Error("derivative order exceeds jet truncation order");
  return c_[i] * space_->factorial_alpha(i);
}

Eigen::VectorXd Jet::gradient() const {
  if (order() < 1) throw Error("gradient requires a jet of order >= 1");
  Eigen::VectorXd g(dim());
  for (int d = 0; d < dim(); ++d) g[d] = c_[space_->bump(0, d)];
  return g;
}

Jet Jet::truncated(int new_order) const {
  if (new_order > order()) throw Error("cannot extend a jet by truncation");
  if (new_order == order()) return *this;
  Jet out(JetSpace::get(dim(), new_order), 0.0);
  const int n = out.space_->size();
  // Graded layout is shared between orders, so this is a prefix copy.
  out.c_ = c_.head(n);
  return out;
}

Jet Jet::partial(int d) const {
  if (order() < 1) throw Error("partial derivative requires a jet of order >= 1");
  if (d < 0 || d >= dim()) throw Error("partial derivative index out of range");
  Jet out(JetSpace::get(dim(), order() - 1), 0.0);
  const auto& osp = *out.space_;
  for (int i = 0; i < osp.size(); ++i) {
    // Taylor coefficient of d_d f at alpha is (alpha_d + 1) * c_{alpha + e_d}.
    const int src = space_->bump(i, d);  // same graded prefix layout
    out.c_[i] = c_[src] * (osp.exponent(i)[d] + 1.0);
  }
  return out;
}

void Jet::check_same(const Jet& o) const {
  if (!space_ || !o.space_) throw Error("operation on an empty jet");
  if (space_.get() != o.space_.get())
    throw Error("jet operands belong to different spaces (dim/order mismatch)");
}

Jet& Jet::operator+=(const Jet& o) {
  check_same(o);
  c_ += o.c_;
  return *this;
}
Jet& Jet::operator-=(const Jet& o) {
  check_same(o);
  c_ -= o.c_;
  return *this;
}
Jet& Jet::operator+=(double s) {
  c_[0] += s;
  return *this;
}
Jet& Jet::operator-=(double s) {
  c_[0] -= s;
  return *this;
}
Jet& Jet::operator*=(double s) {
  c_ *= s;
  return *this;
}
Jet& Jet::operator/=(double s) {
  if (s == 0.0) throw DomainError("division by zero");
  c_ /= s;
  return *this;
}

Jet operator-(const Jet& a) {
  Jet out = a;
  out.c_ = -out.c_;
  return out;
}

Jet operator-(double a, const Jet& b) {
  Jet out = -b;
  out.c_[0] += a;
  return out;
}

Jet operator*(const Jet& a, const Jet& b) {
  a.check_same(b);
  const JetSpace& sp = *a.space_;
  Jet out(a.space_, 0.0);
  const int order = sp.order();
  const int n = sp.size();
  for (int i = 0; i < n; ++i) {
    const double ai = a.c_[i];
    if (ai == 0.0) continue;
    const int jmax = sp.degree_offset(order - sp.degree(i) + 1);
    for (int j = 0; j < jmax; ++j) out.c_[sp.prod(i, j)] += ai * b.c_[j];
  }
  return out;
}

Jet Jet::compose(std::span<const double> f) const {
  // Horner evaluation of sum f_k * (a - a0)^k in the jet ring.
  Jet centered = *this;
  centered.c_[0] = 0.0;
  Jet r(space_, f.empty() ? 0.0 : f[order()]);
  for (int k = order() - 1; k >= 0; --k) {
    r = r * centered;
    r.c_[0] += f[k];
  }
  return r;
}

namespace {

std::vector<double> series_exp(double v, int K) {
  std::vector<double> f(K + 1);
  f[0] = std::exp(v);
  for (int k = 1; k <= K; ++k) f[k] = f[k - 1] / k;
  return f;
}

std::vector<double> series_log(double v, int K) {
  if (v <= 0.0) throw DomainError("log of non-positive value");
  std::vector<double> f(K + 1);
  f[0] = std::log(v);
  double p = 1.0;  // v^{-k} accumulator with sign
  for (int k = 1; k <= K; ++k) {
    p /= v;
    f[k] = ((k % 2 == 1) ? 1.0 : -1.0) * p / k;
  }
  return f;
}

std::vector<double> series_sin_cos(double v, int K, bool is_sin) {
  std::vector<double> f(K + 1);
  const double s = std::sin(v), c = std::cos(v);
  const double cycle_sin[4] = {s, c, -s, -c};
  const double cycle_cos[4] = {c, -s, -c, s};
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    f[k] = (is_sin ? cycle_sin[k % 4] : cycle_cos[k % 4]) / fact;
  }
  return f;
}

std::vector<double> series_tanh(double v, int K) {
  // t' = 1 - t^2 applied to the Taylor coefficients t_k of tanh(v+s).
  std::vector<double> t(K + 1);
  t[0] = std::tanh(v);
  for (int k = 0; k + 1 <= K; ++k) {
    double conv = 0.0;
    for (int i = 0; i <= k; ++i) conv += t[i] * t[k - i];
    t[k + 1] = ((k == 0 ? 1.0 : 0.0) - conv) / (k + 1);
  }
  return t;
}

std::vector<double> series_pow(double v, double p, int K) {
  // Coefficients binom(p,k) v^{p-k}; valid for v > 0.
  std::vector<double> f(K + 1);
  f[0] = std::pow(v, p);
  for (int k = 1; k <= K; ++k) f[k] = f[k - 1] * (p - (k - 1)) / (k * v);
  return f;
}

std::vector<double> series_inverse(double v, int K) {
  if (v == 0.0) throw DomainError("division by zero");
  std::vector<double> f(K + 1);
  f[0] = 1.0 / v;
  for (int k = 1; k <= K; ++k) f[k] = -f[k - 1] / v;
  return f;
}

}  // namespace

Jet inverse(const Jet& a) { return a.compose(series_inverse(a.value(), a.order())); }

Jet operator/(const Jet& a, const Jet& b) { return a * inverse(b); }

Jet sqrt(const Jet& a) {
  const double v = a.value();
  if (v < 0.0) throw DomainError("sqrt of negative value");
  if (v == 0.0) {
    if (a.order() == 0) return Jet(a.space(), 0.0);
    throw DomainError("sqrt is not differentiable at zero");
  }
  return a.compose(series_pow(v, 0.5, a.order()));
}

Jet sin(const Jet& a) { return a.compose(series_sin_cos(a.value(), a.order(), true)); }
Jet cos(const Jet& a) { return a.compose(series_sin_cos(a.value(), a.order(), false)); }
Jet exp(const Jet& a) { return a.compose(series_exp(a.value(), a.order())); }
Jet log(const Jet& a) { return a.compose(series_log(a.value(), a.order())); }
Jet tanh(const Jet& a) { return a.compose(series_tanh(a.value(), a.order())); }

Jet abs(const Jet& a) {
  const double v = a.value();
  if (v > 0.0) return a;
  if (v < 0.0) return -a;
  if (a.order() == 0) return Jet(a.space(), 0.0);
  throw DomainError("abs is not differentiable at zero");
}

Jet pow_const(const Jet& a, double e) {
  long long n = 0;
  if (integer_exponent(e, n)) {
    const int K = a.order();
    if (n == 0) return Jet(a.space(), 1.0);
    Jet base = a;
    unsigned long long k = static_cast<unsigned long long>(n < 0 ? -n : n);
    if (n < 0) base = inverse(base);
    Jet result = base;
    --k;
    // Exponentiation by squaring in the jet ring.
    Jet sq = base;
    while (k > 0) {
      if (k & 1ULL) result = result * sq;
      k >>= 1;
      if (k > 0) sq = sq * sq;
    }
    (void)K;
    return result;
  }
  const double v = a.value();
  if (v <= 0.0) throw DomainError("non-integer power of a non-positive base");
  return a.compose(series_pow(v, e, a.order()));
}

Jet pow(const Jet& a, const Jet& b) { return exp(b * log(a)); }

bool ev_finite(const Jet& a) { return a.coeffs().allFinite(); }

Jet eval_jet(const Expr& e, std::span<const double> base, int order) {
  const int dim = static_cast<int>(base.size());
  auto space = JetSpace::get(dim, order);
  std::vector<Jet> vars;
  vars.reserve(dim);
  for (int i = 0; i < dim; ++i) vars.push_back(Jet::variable(space, i, base[i]));
  return e.eval<Jet>(vars);
}

}  // namespace ureg

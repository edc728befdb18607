#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace ureg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Deterministic random source. std::mt19937_64 has a standard-specified
// sequence; the double mapping below avoids the implementation-defined
// std::uniform_real_distribution so streams are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0,1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform direction on the unit sphere S^{m-1}.
  Vec direction(int m) {
    Vec v(m);
    double n2 = 0.0;
    do {
      for (int i = 0; i < m; ++i) v[i] = normal();
      n2 = v.squaredNorm();
    } while (n2 < 1e-12);
    return v / std::sqrt(n2);
  }

  // Uniform point in the ball of given radius.
  Vec ball_point(int m, double radius) {
    Vec v(m);
    while (true) {
      for (int i = 0; i < m; ++i) v[i] = uniform(-1.0, 1.0);
      if (v.squaredNorm() < 1.0) return radius * v;
    }
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ureg

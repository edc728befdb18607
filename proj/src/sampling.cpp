#include "ureg/sampling.hpp"

#include <cmath>

#include "ureg/errors.hpp"

namespace ureg {

namespace {

// Kronecker (additive recurrence) sequence with the generalized golden-ratio
// generator: alpha_i = phi^-(i+1) where phi is the positive root of
// x^(d+1) = x + 1. Well-distributed, deterministic, and prefix-nested.
std::vector<double> kronecker_alphas(int dim) {
  double phi = 1.5;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
  std::vector<double> a(dim);
  double p = 1.0;
  for (int i = 0; i < dim; ++i) {
    p /= phi;
    a[i] = p;
  }
  return a;
}

}  // namespace

std::vector<Vec> ball_samples(const SamplePlan& plan) {
  if (plan.dim < 1) throw Error("sample plan dimension must be positive");
  if (plan.count < 0) throw Error("sample plan count must be non-negative");
  const auto alphas = kronecker_alphas(plan.dim);

  // Seed only offsets the sequence start; structure is unchanged.
  std::vector<double> u(plan.dim);
  const double offset = static_cast<double>(plan.seed % 1000003ULL) / 1000003.0;
  for (int i = 0; i < plan.dim; ++i) u[i] = std::fmod(0.5 + offset * (i + 1), 1.0);

  std::vector<Vec> out;
  out.reserve(plan.count);
  Vec x(plan.dim);
  // Rejection from the cube is deterministic: candidates are visited in
  // sequence order and kept when inside the unit ball.
  long long guard = 0;
  while (static_cast<int>(out.size()) < plan.count) {
    for (int i = 0; i < plan.dim; ++i) {
      u[i] += alphas[i];
      if (u[i] >= 1.0) u[i] -= 1.0;
      x[i] = 2.0 * u[i] - 1.0;
    }
    if (x.squaredNorm() < 1.0) out.push_back(plan.radius * x);
    if (++guard > 1000LL * (plan.count + 16)) throw Error("ball sampling failed to fill the plan");
  }
  return out;
}

std::vector<SamplePlan> plan_ladder(const SamplePlan& base, int levels, int growth) {
  if (levels < 1) throw Error("plan ladder needs at least one level");
  if (growth < 2) throw Error("plan ladder growth must be at least 2");
  std::vector<SamplePlan> out;
  out.reserve(levels);
  int n = base.count;
  for (int l = 0; l < levels; ++l) {
    SamplePlan p = base;
    p.count = n;
    out.push_back(p);
    n *= growth;
  }
  return out;
}

}  // namespace ureg

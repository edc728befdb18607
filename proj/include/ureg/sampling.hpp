#pragma once

#include <cstdint>
#include <vector>

#include "ureg/types.hpp"

namespace ureg {

// Deterministic low-discrepancy samples in the ball of the given radius.
// Prefixes are nested: the first n points of a larger plan equal the points
// of a smaller plan with the same dim/radius/seed, so estimates computed on
// refined plans are monotone for sup-type aggregations.
struct SamplePlan {
  int dim = 2;
  double radius = 1.0;
  int count = 64;
  std::uint64_t seed = 12345;
};

std::vector<Vec> ball_samples(const SamplePlan& plan);

// The ladder of nested plans used for refinement trends: level l multiplies
// the base count by growth^l.
std::vector<SamplePlan> plan_ladder(const SamplePlan& base, int levels, int growth);

}  // namespace ureg

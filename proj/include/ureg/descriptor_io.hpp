#pragma once

#include <string>

#include "ureg/chart.hpp"

namespace ureg {

// Manifold description files: JSON with dimension, shrink radius, charts
// (metric expression matrix, neighbours with transition maps and overlap
// predicates, optional frames and tags). Schema documented in the README.
std::string descriptor_to_json(const ManifoldDescriptor& M);
ManifoldDescriptor descriptor_from_json(const std::string& text);

ManifoldDescriptor load_descriptor(const std::string& path);
void save_descriptor(const ManifoldDescriptor& M, const std::string& path);

}  // namespace ureg

#pragma once

#include <span>

namespace blindspot {

/// Linear-interpolation quantile (type 7): position q * (n - 1) in the sorted values.
double quantile(std::span<const double> values, double q);

} // namespace blindspot

#include "blindspot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "blindspot/error.hpp"

namespace blindspot {

double quantile(std::span<const double> values, double q)
{
    if (values.empty()) {
        throw Error(ErrorKind::Argument, "quantile of an empty set");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw Error(ErrorKind::Argument, "quantile level must lie in [0, 1]");
    }
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace blindspot

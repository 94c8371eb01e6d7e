#pragma once
// Exact Euclidean distance transform (separable lower-envelope of parabolas).

#include <limits>

#include "vterr/types.hpp"

namespace vterr {

inline constexpr double kInfDistance = std::numeric_limits<double>::infinity();

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `features`. Values are exact integers; +inf everywhere when `features` is
/// empty.
Grid<double> squared_distance_transform(const BinaryMask &features);

} // namespace vterr

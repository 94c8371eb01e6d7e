#pragma once
// Overlap and surface-distance metrics between a predicted and a reference
// mask, in pixel units.
//
// Surfaces are inner boundaries under 4-connectivity (the image border counts
// as outside). Distances are exact Euclidean.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vterr/types.hpp"

namespace vterr::metrics {

class EmptyMaskError : public Error {
public:
  using Error::Error;
};

/// 2|a&b| / (|a|+|b|); 1.0 when both are empty.
double dsc(const BinaryMask &a, const BinaryMask &b);
/// |a&b| / |a|b|; 1.0 when both are empty.
double jaccard(const BinaryMask &a, const BinaryMask &b);

/// Set pixels with at least one 4-neighbour outside the mask.
BinaryMask boundary_mask(const BinaryMask &a);
std::vector<std::pair<int, int>> boundary(const BinaryMask &a);

/// Symmetric mean boundary-to-boundary distance. Throws EmptyMaskError when
/// either mask is empty.
double asd(const BinaryMask &a, const BinaryMask &b);
/// Symmetric Hausdorff distance between boundaries.
double hausdorff(const BinaryMask &a, const BinaryMask &b);

/// Both surface metrics from one pair of distance transforms.
struct SurfaceDistances {
  double asd = 0.0;
  double hd = 0.0;
};
SurfaceDistances surface_distances(const BinaryMask &a, const BinaryMask &b);

struct TerritoryMetrics {
  /// False when the reference territory is empty; the row is then absent.
  bool present = true;
  double dsc = 0.0;
  double ji = 0.0;
  /// Empty when the predicted territory is empty (excluded from aggregates).
  std::optional<double> asd;
  std::optional<double> hd;
  std::string note;
};

struct OverlapReport {
  TerritoryMetrics ica;
  TerritoryMetrics mca;

  [[nodiscard]] const TerritoryMetrics &row(Territory t) const {
    return t == Territory::ICA ? ica : mca;
  }
};

TerritoryMetrics territory_metrics(const BinaryMask &pred, const BinaryMask &ref);
OverlapReport overlap_report(const TerritoryMask &pred, const TerritoryMask &ref);

} // namespace vterr::metrics

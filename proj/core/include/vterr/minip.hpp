#pragma once
// Minimum-intensity projections over frame subsets, phase splitting, and
// resampling to the standard 1024x1024 grid.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vterr/types.hpp"

namespace vterr::minip {

/// Per-frame phase labels, one per frame of the sequence.
struct PhaseBoundaries {
  std::vector<Phase> labels;

  [[nodiscard]] std::vector<int> frames_of(Phase p) const;
  /// True when labels follow NON_CONTRAST -> ARTERIAL -> CAPILLARY -> VENOUS
  /// as contiguous non-decreasing runs.
  [[nodiscard]] bool canonical() const;
};

/// Pixelwise minimum over `frame_set` (order and duplicates are ignored).
/// The scope is FULL when every frame is selected; otherwise `scope` is used,
/// falling back to the unanimous phase label of the selected frames.
MinIpImage compute_minip(const DsaSequence &seq, std::span<const int> frame_set,
                         std::optional<PhaseScope> scope = std::nullopt);
MinIpImage compute_minip(const DsaSequence &seq);

std::map<Phase, MinIpImage> phase_minips(const DsaSequence &seq,
                                         const PhaseBoundaries &boundaries);

struct PhaseEstimate {
  PhaseBoundaries boundaries;
  /// Set when no contrast was detected and every frame is NON_CONTRAST.
  bool no_contrast = false;
  /// Fraction of pixels opacified per frame.
  std::vector<double> opacity_curve;
  double threshold = 0.0;
};

/// Heuristic phase assignment from the temporal opacity curve.
PhaseEstimate estimate_phases(const DsaSequence &seq);

/// Median of the outermost pixel ring; used as the fill value for intensity
/// padding and out-of-bounds resampling.
std::uint16_t border_background(const Image16 &img);

struct StandardizeOptions {
  int size = kStandardSize;
};

/// Letterbox to square (centered), then resample bilinearly to size x size.
Image16 standardize(const Image16 &img, StandardizeOptions opt = {});
MinIpImage standardize(const MinIpImage &img, StandardizeOptions opt = {});
/// Letterbox with background, then nearest-neighbour resample.
TerritoryMask standardize(const TerritoryMask &mask, StandardizeOptions opt = {});

/// Plain bilinear resize (pixel-center aligned, edge clamped).
Image16 resize_bilinear(const Image16 &img, int width, int height);
Grid<std::uint8_t> resize_nearest(const Grid<std::uint8_t> &img, int width,
                                  int height);

} // namespace vterr::minip

#pragma once
// Atlas-registration baseline: NCC-driven affine alignment of a moving MinIP
// onto a fixed MinIP, best-atlas selection over a library, and pre-to-post
// alignment of acquisitions from one patient.
//
// The optimizer works on a three-level pyramid (size/4, size/2, size). An
// exhaustive grid over rotation, isotropic scale and translation runs on the
// coarsest level; the best seeds are refined by coordinate descent over
// (theta, sx, sy, tx, ty) with shrinking steps, and the winner is carried up
// through the finer levels.

#include <filesystem>
#include <string>
#include <vector>

#include "vterr/affine.hpp"
#include "vterr/types.hpp"

namespace vterr::reg {

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;
  [[nodiscard]] std::vector<double> values() const;
};

struct RegistrationOptions {
  GridRange theta_deg{-15.0, 15.0, 3.0};
  GridRange scale{0.85, 1.15, 0.05};
  GridRange translation{-60.0, 60.0, 10.0};
  int seeds = 5;
  int max_iterations_per_level = 200;
  double tolerance = 1e-5;
  int levels = 3;
  /// Sample-grid density: samples per image axis at each level (the coarse
  /// grid search uses `grid_samples_per_axis`).
  int grid_samples_per_axis = 32;
  int refine_samples_per_axis = 64;
  /// Minimum fraction of samples that must map inside the moving image.
  double min_overlap = 0.5;
  /// Results below this similarity are marked failed.
  double failure_threshold = 0.2;
  /// Worker threads for per-atlas runs; 0 = hardware concurrency.
  unsigned threads = 0;
};

struct LevelTrace {
  int size = 0;
  /// Similarity after each accepted step (first entry = starting point).
  std::vector<double> accepted;
};

struct RegistrationResult {
  /// Maps moving-image content onto the fixed image:
  /// warp(moving, transform) ~ fixed.
  AffineTransform2D transform;
  double similarity = -1.0;
  std::string atlas_id;
  int iterations = 0;
  double elapsed_seconds = 0.0;
  bool failed = false;
  std::vector<LevelTrace> trace;
};

/// Normalized cross-correlation over all pixels. Throws on zero variance.
double ncc(const Image16 &a, const Image16 &b);
/// NCC between `fixed` and `moving` sampled through `transform`
/// (moving -> fixed), over fixed pixels whose pre-image lies inside `moving`.
double ncc_under(const Image16 &moving, const Image16 &fixed,
                 const AffineTransform2D &transform);

RegistrationResult optimize(const Image16 &moving, const Image16 &fixed,
                            const RegistrationOptions &opt = {});
RegistrationResult optimize(const MinIpImage &moving, const MinIpImage &fixed,
                            const RegistrationOptions &opt = {});

struct AtlasEntry {
  std::string id;
  View view = View::AP;
  MinIpImage minip;
  TerritoryMask masks;
};

struct AtlasRegistration {
  RegistrationResult best;
  TerritoryMask warped_mask;
  /// One result per view-matched atlas, in library order.
  std::vector<RegistrationResult> runs;
};

/// Registers every view-matched atlas to the patient and keeps the highest
/// similarity (ties: lowest atlas id).
AtlasRegistration register_best_atlas(const std::vector<AtlasEntry> &library,
                                      const MinIpImage &patient, View view,
                                      const RegistrationOptions &opt = {});

/// Aligns the pre-treatment MinIP (moving) onto the post-treatment MinIP.
RegistrationResult register_pre_to_post(const MinIpImage &pre,
                                        const MinIpImage &post,
                                        const RegistrationOptions &opt = {});

/// Library directory: atlas.json index [{id, view, minip, mask}] with paths
/// relative to the directory.
std::vector<AtlasEntry> load_atlas_library(const std::filesystem::path &dir);
void save_atlas_library(const std::vector<AtlasEntry> &library,
                        const std::filesystem::path &dir);

} // namespace vterr::reg

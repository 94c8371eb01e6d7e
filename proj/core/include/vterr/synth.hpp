#pragma once
// Deterministic synthetic DSA phantoms with ground-truth territories and
// phase schedules.
//
// Anatomy (skull, territories, vessel trees) is a pure function of
// (seed, view); stage and occlusion only change what is rendered, so the pre-
// and post-treatment acquisitions of one patient share anatomy.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vterr/affine.hpp"
#include "vterr/minip.hpp"
#include "vterr/registration.hpp"
#include "vterr/types.hpp"

namespace vterr::synth {

struct SkullParams {
  double axis_x = 0.40;      // semi-axis as a fraction of the canvas
  double axis_y = 0.44;
  double thickness = 0.022;  // fraction of the canvas
  double attenuation = 70.0; // ring depth at full motion scale
};

struct TreeParams {
  int depth = 6;
  double root_width = 9.0;    // px at the 512 canvas, scaled with it
  double width_decay = 0.72;
  double length_decay = 0.78;
  double branch_angle_deg = 32.0;
  double angle_jitter_deg = 10.0;
};

struct BolusParams {
  int non_contrast_frames = 2;
  int arterial_frames = 4;
  int capillary_frames = 4;
  int venous_frames = 3;
  /// Peak darkening of a fully opacified vessel; 0 disables contrast.
  double attenuation = 1000.0;

  [[nodiscard]] int total() const {
    return non_contrast_frames + arterial_frames + capillary_frames + venous_frames;
  }
};

struct PhantomSpec {
  std::uint64_t seed = 1;
  View view = View::AP;
  Stage stage = Stage::PostEvt;
  Occlusion occlusion = Occlusion::M1;
  int canvas = 512;
  double background = 3000.0;
  SkullParams skull;
  TreeParams tree;
  BolusParams bolus;
  /// Mask-to-frame skull displacement in px; the residual ring scales with it.
  double motion = 2.0;
  /// Sigma of the additive noise field (static over the acquisition).
  double noise = 12.0;
  /// Anatomy jitter; 0 renders the population-mean anatomy.
  double variability = 1.0;
  /// Write the generating schedule into the sequence's phase labels.
  bool annotate_phases = true;
  std::string patient_id;
};

struct Phantom {
  DsaSequence sequence;
  TerritoryMask truth;
  minip::PhaseBoundaries phases;
};

/// Throws vterr::Error on an invalid spec or an internally inconsistent
/// anatomy (overlapping territories).
Phantom generate(const PhantomSpec &spec);

/// Population-mean territory layout for a view (no anatomical jitter).
TerritoryMask mean_anatomy(View view, int canvas = 512);

/// Applies one transform to every frame and to the truth mask.
Phantom perturb(const Phantom &p, const AffineTransform2D &t);

/// Pixels of `img` darker than `background - threshold`.
std::size_t dark_pixels(const Image16 &img, double background, double threshold);

/// Full-phase projection and truth, both standardized to 1024x1024.
struct StandardCase {
  MinIpImage minip;
  TerritoryMask truth;
};
StandardCase standard_case(const Phantom &p);

/// Stand-in for the external segmentation model: a label map derived purely
/// from image evidence. Pixels darker than the background by a tenth of the
/// image's contrast range are opened, closed and hole-filled into a
/// territory; MCA/ACA are assigned by proximity to the labels of `prior`. With no contrast present the evidence is noise and the output
/// degrades accordingly.
TerritoryMask evidence_segmentation(const MinIpImage &minip,
                                    const TerritoryMask &prior);

/// Simulated model prediction: the truth with boundary perturbations and
/// residual one-pixel seams, passed through ACA derivation with cleanup of
/// the given radius.
TerritoryMask simulated_model_prediction(const TerritoryMask &truth,
                                         std::uint64_t seed, int radius = 3);

/// A library of post-treatment atlases at 1024x1024, ids "atlas_00"...; views
/// alternate AP / LATERAL.
std::vector<reg::AtlasEntry> make_atlas_library(int count = 21,
                                                std::uint64_t base_seed = 9000);

struct CohortOptions {
  int cases = 50;
  std::uint64_t seed = 42;
  int acquisitions_per_patient = 4;
  /// Also writes phase MinIPs and per-phase predictions. The MODEL
  /// prediction then comes from evidence_segmentation on the full MinIP so
  /// full and per-phase outputs share one predictor; otherwise it is
  /// simulated_model_prediction of the truth.
  bool with_phase_outputs = false;
  bool with_sequences = false;
};

/// Writes a synthetic cohort (MinIPs, references, simulated MODEL
/// predictions, optionally phase MinIPs and phase predictions) plus
/// manifest.json into `dir`. Returns the manifest path.
std::filesystem::path write_cohort(const CohortOptions &opt,
                                   const std::filesystem::path &dir);

/// Deterministic cohort layout: patient ids, views, stages and occlusions.
struct CohortSlot {
  std::string case_id;
  std::string patient_id;
  std::uint64_t seed = 0;
  View view = View::AP;
  Stage stage = Stage::PostEvt;
  Occlusion occlusion = Occlusion::M1;
};
std::vector<CohortSlot> cohort_layout(const CohortOptions &opt);
PhantomSpec spec_for(const CohortSlot &slot);

} // namespace vterr::synth

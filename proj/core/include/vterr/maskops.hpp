#pragma once
// Territory-mask algebra and morphological cleanup.
//
// The ACA region is derived as ICA minus MCA; the remainder carries thin
// residual lines along the MCA border which cleanup removes by erosion,
// largest-component selection and dilation with a Euclidean disk.

#include <vector>

#include "vterr/types.hpp"

namespace vterr::maskops {

enum class Connectivity { Four = 4, Eight = 8 };
enum class Keep { LargestComponent, All };

struct MorphologyParams {
  int erosion_radius = 3;
  int dilation_radius = 3;
  Connectivity connectivity = Connectivity::Eight;
  Keep keep = Keep::LargestComponent;

  static MorphologyParams with_radius(int r) {
    MorphologyParams p;
    p.erosion_radius = r;
    p.dilation_radius = r;
    return p;
  }
};

struct CleanupResult {
  BinaryMask mask;
  /// Set when erosion left nothing (or the input was empty).
  bool empty_warning = false;
  /// Connected components present after erosion, before selection.
  int components_after_erosion = 0;
};

BinaryMask subtract(const BinaryMask &ica, const BinaryMask &mca);
BinaryMask reconstruct_ica(const BinaryMask &aca, const BinaryMask &mca);
TerritoryMask assemble_label_map(const BinaryMask &mca, const BinaryMask &aca);

/// Erosion by the disk {dx^2 + dy^2 <= r^2}; pixels outside the image count as
/// background.
BinaryMask erode(const BinaryMask &m, int radius);
/// Dilation by the same disk.
BinaryMask dilate(const BinaryMask &m, int radius);

struct Components {
  Grid<int> labels; // 0 = background, 1..count
  std::vector<std::size_t> areas; // areas[label - 1]
  [[nodiscard]] int count() const { return static_cast<int>(areas.size()); }
};

/// Raster-order connected-component labelling.
Components connected_components(const BinaryMask &m, Connectivity c);
/// Largest component; ties go to the component met first in raster order.
BinaryMask largest_component(const BinaryMask &m, Connectivity c);
/// Sets every background pixel not 4-connected to the image border.
BinaryMask fill_holes(const BinaryMask &m);

CleanupResult cleanup(const BinaryMask &raw, const MorphologyParams &p = {});

/// Full label-map derivation from ICA and MCA annotations: ACA = ICA - MCA,
/// cleaned, then assembled with MCA precedence.
struct DerivedLabels {
  TerritoryMask labels;
  CleanupResult aca_cleanup;
};
DerivedLabels derive_label_map(const BinaryMask &ica, const BinaryMask &mca,
                               const MorphologyParams &p = {});

/// Post-processing applied to a predicted label map: the ACA label is
/// cleaned and the map reassembled; the ICA is the union of both labels.
TerritoryMask postprocess_prediction(const TerritoryMask &pred,
                                     const MorphologyParams &p = {});

} // namespace vterr::maskops

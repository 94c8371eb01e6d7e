#pragma once
// 2D affine maps (rotation, anisotropic scale, translation about the image
// center) and resampling through them.

#include <optional>

#include "vterr/types.hpp"

namespace vterr {

/// Parametric transform. Angles in degrees, translations in pixels of the
/// full-resolution image. Maps p to R(theta) * diag(sx, sy) * (p - c) + c + t.
struct AffineTransform2D {
  double theta_deg = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  static AffineTransform2D identity() { return {}; }
  [[nodiscard]] bool valid() const { return sx > 0.0 && sy > 0.0; }
};

/// (x, y) -> (a x + b y + c, d x + e y + f), pixel-center coordinates.
struct AffineMatrix {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  static AffineMatrix identity() { return {}; }
  static AffineMatrix translation(double tx, double ty) {
    return {1, 0, tx, 0, 1, ty};
  }

  [[nodiscard]] double det() const { return a * e - b * d; }
  [[nodiscard]] bool invertible() const;
  /// Throws vterr::Error when singular.
  [[nodiscard]] AffineMatrix inverse() const;
  /// (*this)(other(p)).
  [[nodiscard]] AffineMatrix compose(const AffineMatrix &other) const;

  void apply(double x, double y, double &ox, double &oy) const {
    ox = a * x + b * y + c;
    oy = d * x + e * y + f;
  }
};

/// Center of a width x height image in pixel-center coordinates.
struct Center {
  double x = 0.0;
  double y = 0.0;
  static Center of(Shape s) { return {(s.width - 1) * 0.5, (s.height - 1) * 0.5}; }
};

AffineMatrix to_matrix(const AffineTransform2D &t, Center c);
/// Best parametric reading of a matrix: exact for rotation+scale matrices,
/// shear (which the parametrisation cannot hold) is dropped.
AffineTransform2D to_params(const AffineMatrix &m, Center c);
/// Exact for isotropic scale; with sx != sy the inverse carries shear, which
/// to_params drops.
AffineTransform2D inverse(const AffineTransform2D &t, Center c);

/// Moves content forward: out(M p) = img(p). Bilinear; samples falling
/// outside the source take `fill` (default: median of the border ring).
Image16 warp(const Image16 &img, const AffineMatrix &m,
             std::optional<std::uint16_t> fill = std::nullopt);
MinIpImage warp(const MinIpImage &img, const AffineTransform2D &t,
                std::optional<std::uint16_t> fill = std::nullopt);
/// Nearest-neighbour label warp; out-of-bounds becomes background.
TerritoryMask warp_mask(const TerritoryMask &mask, const AffineMatrix &m);
TerritoryMask warp_mask(const TerritoryMask &mask, const AffineTransform2D &t);
BinaryMask warp_binary(const BinaryMask &mask, const AffineMatrix &m);

/// Bilinear sample with edge handling left to the caller: (x, y) must lie in
/// [0, w-1] x [0, h-1].
template <typename T>
inline double bilinear(const Grid<T> &img, double x, double y) {
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = x0 + 1 < img.width() ? x0 + 1 : x0;
  const int y1 = y0 + 1 < img.height() ? y0 + 1 : y0;
  const double wx = x - x0, wy = y - y0;
  const double top = img(x0, y0) + wx * (double(img(x1, y0)) - img(x0, y0));
  const double bot = img(x0, y1) + wx * (double(img(x1, y1)) - img(x0, y1));
  return top + wy * (bot - top);
}

} // namespace vterr

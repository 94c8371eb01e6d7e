#include "vterr/affine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vterr/minip.hpp"

namespace vterr {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

bool AffineMatrix::invertible() const {
  const double scale = std::max({std::fabs(a), std::fabs(b), std::fabs(d), std::fabs(e), 1e-300});
  return std::isfinite(det()) && std::fabs(det()) > 1e-12 * scale * scale;
}

AffineMatrix AffineMatrix::inverse() const {
  if (!invertible())
    throw Error("affine transform is not invertible");
  const double k = 1.0 / det();
  AffineMatrix r;
  r.a = e * k;
  r.b = -b * k;
  r.d = -d * k;
  r.e = a * k;
  r.c = -(r.a * c + r.b * f);
  r.f = -(r.d * c + r.e * f);
  return r;
}

AffineMatrix AffineMatrix::compose(const AffineMatrix &o) const {
  AffineMatrix r;
  r.a = a * o.a + b * o.d;
  r.b = a * o.b + b * o.e;
  r.c = a * o.c + b * o.f + c;
  r.d = d * o.a + e * o.d;
  r.e = d * o.b + e * o.e;
  r.f = d * o.c + e * o.f + f;
  return r;
}

AffineMatrix to_matrix(const AffineTransform2D &t, Center c) {
  if (!t.valid())
    throw Error("affine transform needs positive scales");
  const double cs = std::cos(t.theta_deg * kDeg), sn = std::sin(t.theta_deg * kDeg);
  AffineMatrix m;
  m.a = cs * t.sx;
  m.b = -sn * t.sy;
  m.d = sn * t.sx;
  m.e = cs * t.sy;
  m.c = c.x + t.tx - (m.a * c.x + m.b * c.y);
  m.f = c.y + t.ty - (m.d * c.x + m.e * c.y);
  return m;
}

AffineTransform2D to_params(const AffineMatrix &m, Center c) {
  AffineTransform2D t;
  t.theta_deg = std::atan2(m.d, m.a) / kDeg;
  t.sx = std::hypot(m.a, m.d);
  t.sy = m.det() / t.sx;
  double ox, oy;
  m.apply(c.x, c.y, ox, oy);
  t.tx = ox - c.x;
  t.ty = oy - c.y;
  return t;
}

AffineTransform2D inverse(const AffineTransform2D &t, Center c) {
  return to_params(to_matrix(t, c).inverse(), c);
}

Image16 warp(const Image16 &img, const AffineMatrix &m,
             std::optional<std::uint16_t> fill) {
  const AffineMatrix inv = m.inverse();
  const std::uint16_t bg = fill ? *fill : minip::border_background(img);
  Image16 out(img.shape(), bg);
  const double xmax = img.width() - 1, ymax = img.height() - 1;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double sx, sy;
      inv.apply(x, y, sx, sy);
      if (sx < 0.0 || sy < 0.0 || sx > xmax || sy > ymax)
        continue;
      out(x, y) = static_cast<std::uint16_t>(
          std::clamp(std::lround(bilinear(img, sx, sy)), 0L, 65535L));
    }
  return out;
}

MinIpImage warp(const MinIpImage &img, const AffineTransform2D &t,
                std::optional<std::uint16_t> fill) {
  MinIpImage out = img;
  out.pixels = warp(img.pixels, to_matrix(t, Center::of(img.pixels.shape())), fill);
  return out;
}

namespace {
template <typename G> G warp_nearest(const G &src, const AffineMatrix &m) {
  const AffineMatrix inv = m.inverse();
  G out(src.shape());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      double sx, sy;
      inv.apply(x, y, sx, sy);
      const long ix = std::lround(sx), iy = std::lround(sy);
      if (ix < 0 || iy < 0 || ix >= src.width() || iy >= src.height())
        continue;
      out(x, y) = src(static_cast<int>(ix), static_cast<int>(iy));
    }
  return out;
}
} // namespace

TerritoryMask warp_mask(const TerritoryMask &mask, const AffineMatrix &m) {
  return TerritoryMask(warp_nearest(mask.labels(), m));
}

TerritoryMask warp_mask(const TerritoryMask &mask, const AffineTransform2D &t) {
  return warp_mask(mask, to_matrix(t, Center::of(mask.shape())));
}

BinaryMask warp_binary(const BinaryMask &mask, const AffineMatrix &m) {
  return BinaryMask(warp_nearest<Grid<std::uint8_t>>(mask, m));
}

} // namespace vterr

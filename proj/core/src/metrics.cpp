#include "vterr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vterr/distance.hpp"

namespace vterr::metrics {

namespace {

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts count_pair(const BinaryMask &a, const BinaryMask &b, const char *what) {
  require_same_shape(a.shape(), b.shape(), what);
  Counts c;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const bool x = pa[i] != 0, y = pb[i] != 0;
    c.a += x;
    c.b += y;
    c.both += x && y;
  }
  return c;
}

} // namespace

double dsc(const BinaryMask &a, const BinaryMask &b) {
  const Counts c = count_pair(a, b, "dsc");
  if (c.a + c.b == 0)
    return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double jaccard(const BinaryMask &a, const BinaryMask &b) {
  const Counts c = count_pair(a, b, "jaccard");
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0)
    return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

BinaryMask boundary_mask(const BinaryMask &a) {
  BinaryMask out(a.shape());
  const int w = a.width(), h = a.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!a(x, y))
        continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                        !a(x - 1, y) || !a(x + 1, y) || !a(x, y - 1) ||
                        !a(x, y + 1);
      if (edge)
        out(x, y) = 1;
    }
  return out;
}

std::vector<std::pair<int, int>> boundary(const BinaryMask &a) {
  if (a.none())
    throw EmptyMaskError("boundary: empty mask");
  const BinaryMask b = boundary_mask(a);
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x)
      if (b(x, y))
        out.emplace_back(x, y);
  return out;
}

SurfaceDistances surface_distances(const BinaryMask &a, const BinaryMask &b) {
  require_same_shape(a.shape(), b.shape(), "surface_distances");
  if (a.none() || b.none())
    throw EmptyMaskError("surface distance undefined: empty mask");
  const BinaryMask ba = boundary_mask(a);
  const BinaryMask bb = boundary_mask(b);
  const Grid<double> to_b = squared_distance_transform(bb);
  const Grid<double> to_a = squared_distance_transform(ba);

  double sum = 0.0, worst = 0.0;
  std::size_t n = 0;
  const auto pa = ba.pixels(), pb = bb.pixels();
  const auto da = to_a.pixels(), db = to_b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]) {
      const double d = std::sqrt(db[i]);
      sum += d;
      worst = std::max(worst, d);
      ++n;
    }
    if (pb[i]) {
      const double d = std::sqrt(da[i]);
      sum += d;
      worst = std::max(worst, d);
      ++n;
    }
  }
  return {sum / static_cast<double>(n), worst};
}

double asd(const BinaryMask &a, const BinaryMask &b) {
  return surface_distances(a, b).asd;
}

double hausdorff(const BinaryMask &a, const BinaryMask &b) {
  return surface_distances(a, b).hd;
}

TerritoryMetrics territory_metrics(const BinaryMask &pred, const BinaryMask &ref) {
  TerritoryMetrics m;
  if (ref.none()) {
    m.present = false;
    m.note = "reference territory empty";
    return m;
  }
  m.dsc = dsc(pred, ref);
  m.ji = jaccard(pred, ref);
  if (pred.none()) {
    m.note = "predicted territory empty";
    return m;
  }
  const SurfaceDistances s = surface_distances(pred, ref);
  m.asd = s.asd;
  m.hd = s.hd;
  return m;
}

OverlapReport overlap_report(const TerritoryMask &pred, const TerritoryMask &ref) {
  require_same_shape(pred.shape(), ref.shape(), "overlap_report");
  return {territory_metrics(pred.ica(), ref.ica()),
          territory_metrics(pred.mca(), ref.mca())};
}

} // namespace vterr::metrics

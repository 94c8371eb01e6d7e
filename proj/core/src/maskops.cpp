#include "vterr/maskops.hpp"

#include <algorithm>
#include <deque>

#include "vterr/distance.hpp"

namespace vterr::maskops {

BinaryMask subtract(const BinaryMask &ica, const BinaryMask &mca) {
  require_same_shape(ica.shape(), mca.shape(), "subtract");
  BinaryMask out(ica.shape());
  const auto a = ica.pixels(), b = mca.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = (a[i] && !b[i]) ? 1 : 0;
  return out;
}

BinaryMask reconstruct_ica(const BinaryMask &aca, const BinaryMask &mca) {
  require_same_shape(aca.shape(), mca.shape(), "reconstruct_ica");
  BinaryMask out(aca.shape());
  const auto a = aca.pixels(), b = mca.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

TerritoryMask assemble_label_map(const BinaryMask &mca, const BinaryMask &aca) {
  require_same_shape(mca.shape(), aca.shape(), "assemble_label_map");
  Grid<std::uint8_t> labels(mca.shape(), 0);
  const auto m = mca.pixels(), a = aca.pixels();
  auto o = labels.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = m[i] ? 1 : (a[i] ? 2 : 0);
  return TerritoryMask(std::move(labels));
}

BinaryMask erode(const BinaryMask &m, int radius) {
  if (radius < 0)
    throw Error("erode: negative radius");
  if (radius == 0)
    return m;
  // A pixel survives iff no background pixel (inside or outside the image)
  // lies within the disk.
  BinaryMask background(m.shape());
  const auto src = m.pixels();
  auto bg = background.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    bg[i] = src[i] ? 0 : 1;
  const Grid<double> d2 = squared_distance_transform(background);
  const double r2 = double(radius) * radius;
  BinaryMask out(m.shape());
  const int w = m.width(), h = m.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m(x, y))
        continue;
      const double edge = std::min({x + 1, y + 1, w - x, h - y});
      if (d2(x, y) > r2 && edge * edge > r2)
        out(x, y) = 1;
    }
  return out;
}

BinaryMask dilate(const BinaryMask &m, int radius) {
  if (radius < 0)
    throw Error("dilate: negative radius");
  if (radius == 0)
    return m;
  const Grid<double> d2 = squared_distance_transform(m);
  const double r2 = double(radius) * radius;
  BinaryMask out(m.shape());
  const auto d = d2.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = d[i] <= r2 ? 1 : 0;
  return out;
}

Components connected_components(const BinaryMask &m, Connectivity c) {
  Components out{Grid<int>(m.shape(), 0), {}};
  const int w = m.width(), h = m.height();
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int nn = c == Connectivity::Eight ? 8 : 4;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m(x, y) || out.labels(x, y))
        continue;
      const int label = out.count() + 1;
      std::size_t area = 0;
      out.labels(x, y) = label;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        ++area;
        for (int k = 0; k < nn; ++k) {
          const int nx = cx + dx8[k], ny = cy + dy8[k];
          if (m.contains(nx, ny) && m(nx, ny) && !out.labels(nx, ny)) {
            out.labels(nx, ny) = label;
            queue.emplace_back(nx, ny);
          }
        }
      }
      out.areas.push_back(area);
    }
  return out;
}

BinaryMask largest_component(const BinaryMask &m, Connectivity c) {
  const Components comps = connected_components(m, c);
  BinaryMask out(m.shape());
  if (comps.count() == 0)
    return out;
  const auto best = std::max_element(comps.areas.begin(), comps.areas.end());
  const int keep = static_cast<int>(best - comps.areas.begin()) + 1;
  const auto l = comps.labels.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = l[i] == keep ? 1 : 0;
  return out;
}

BinaryMask fill_holes(const BinaryMask &m) {
  const int w = m.width(), h = m.height();
  BinaryMask outside(m.shape());
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (!m(x, y) && !outside(x, y)) {
      outside(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  static constexpr int dx[] = {1, -1, 0, 0};
  static constexpr int dy[] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [cx, cy] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = cx + dx[k], ny = cy + dy[k];
      if (m.contains(nx, ny))
        seed(nx, ny);
    }
  }
  BinaryMask out(m.shape());
  const auto o_src = outside.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i)
    o[i] = o_src[i] ? 0 : 1;
  return out;
}

CleanupResult cleanup(const BinaryMask &raw, const MorphologyParams &p) {
  if (p.erosion_radius < 0 || p.dilation_radius < 0)
    throw Error("cleanup: radii must be >= 0");
  CleanupResult res;
  BinaryMask eroded = erode(raw, p.erosion_radius);
  res.components_after_erosion =
      connected_components(eroded, p.connectivity).count();
  if (res.components_after_erosion == 0) {
    res.mask = BinaryMask(raw.shape());
    res.empty_warning = true;
    return res;
  }
  if (p.keep == Keep::LargestComponent)
    eroded = largest_component(eroded, p.connectivity);
  res.mask = dilate(eroded, p.dilation_radius);
  return res;
}

DerivedLabels derive_label_map(const BinaryMask &ica, const BinaryMask &mca,
                               const MorphologyParams &p) {
  const BinaryMask raw_aca = subtract(ica, mca);
  CleanupResult cleaned = cleanup(raw_aca, p);
  TerritoryMask labels = assemble_label_map(mca, cleaned.mask);
  return {std::move(labels), std::move(cleaned)};
}

TerritoryMask postprocess_prediction(const TerritoryMask &pred,
                                     const MorphologyParams &p) {
  const CleanupResult aca = cleanup(pred.aca(), p);
  return assemble_label_map(pred.mca(), aca.mask);
}

} // namespace vterr::maskops

#include "vterr/distance.hpp"

#include <vector>

namespace vterr {

namespace {

// 1D squared distance transform of a sampled function f over n cells.
// v: parabola apexes, z: envelope breakpoints.
void edt_1d(const double *f, double *d, int n, std::vector<int> &v,
            std::vector<double> &z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInfDistance)
      continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInfDistance;
      z[1] = kInfDistance;
      continue;
    }
    double s;
    for (;;) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0)
        --k;
      else
        break;
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      // k == 0 and the new parabola dominates the whole line.
      v[0] = q;
      z[0] = -kInfDistance;
      z[1] = kInfDistance;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInfDistance;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q)
      d[q] = kInfDistance;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q)
      ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

} // namespace

Grid<double> squared_distance_transform(const BinaryMask &features) {
  const int w = features.width(), h = features.height();
  Grid<double> out(w, h, kInfDistance);
  if (w == 0 || h == 0)
    return out;

  const int n = std::max(w, h);
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));

  // Columns.
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y)
      f[static_cast<std::size_t>(y)] = features(x, y) ? 0.0 : kInfDistance;
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y)
      out(x, y) = d[static_cast<std::size_t>(y)];
  }
  // Rows.
  for (int y = 0; y < h; ++y) {
    auto row = out.row(y);
    std::copy(row.begin(), row.end(), f.begin());
    edt_1d(f.data(), d.data(), w, v, z);
    std::copy(d.begin(), d.begin() + w, row.begin());
  }
  return out;
}

} // namespace vterr

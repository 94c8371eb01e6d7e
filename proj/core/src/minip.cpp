#include "vterr/minip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vterr::minip {

std::vector<int> PhaseBoundaries::frames_of(Phase p) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == p)
      out.push_back(static_cast<int>(i));
  return out;
}

bool PhaseBoundaries::canonical() const {
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (static_cast<int>(labels[i]) < static_cast<int>(labels[i - 1]))
      return false;
  return true;
}

MinIpImage compute_minip(const DsaSequence &seq, std::span<const int> frame_set,
                         std::optional<PhaseScope> scope) {
  if (frame_set.empty())
    throw Error("compute_minip: empty frame set");
  if (seq.frames.empty())
    throw Error("compute_minip: sequence has no frames");

  std::vector<int> frames(frame_set.begin(), frame_set.end());
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  if (frames.front() < 0 || frames.back() >= seq.frame_count())
    throw Error("compute_minip: frame index out of range [0," +
                std::to_string(seq.frame_count()) + ")");

  MinIpImage out;
  out.pixels = seq.frames[static_cast<std::size_t>(frames.front())];
  auto dst = out.pixels.pixels();
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const auto &f = seq.frames[static_cast<std::size_t>(frames[k])];
    require_same_shape(f.shape(), out.pixels.shape(), "compute_minip");
    const auto src = f.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = std::min(dst[i], src[i]);
  }

  if (static_cast<int>(frames.size()) == seq.frame_count()) {
    out.phase_scope = PhaseScope::Full;
  } else if (scope) {
    out.phase_scope = scope;
  } else if (seq.phase_labels) {
    const Phase first = (*seq.phase_labels)[static_cast<std::size_t>(frames.front())];
    const bool unanimous = std::all_of(frames.begin(), frames.end(), [&](int i) {
      return (*seq.phase_labels)[static_cast<std::size_t>(i)] == first;
    });
    if (unanimous)
      out.phase_scope = scope_of(first);
  }
  out.source_frames = std::move(frames);
  return out;
}

MinIpImage compute_minip(const DsaSequence &seq) {
  std::vector<int> all(static_cast<std::size_t>(seq.frame_count()));
  std::iota(all.begin(), all.end(), 0);
  return compute_minip(seq, all);
}

std::map<Phase, MinIpImage> phase_minips(const DsaSequence &seq,
                                         const PhaseBoundaries &boundaries) {
  if (static_cast<int>(boundaries.labels.size()) != seq.frame_count())
    throw Error("phase_minips: " + std::to_string(boundaries.labels.size()) +
                " phase labels for " + std::to_string(seq.frame_count()) +
                " frames");
  std::map<Phase, MinIpImage> out;
  for (Phase p : kAllPhases) {
    const auto frames = boundaries.frames_of(p);
    if (frames.empty())
      continue;
    MinIpImage img = compute_minip(seq, frames, scope_of(p));
    // A phase spanning the whole sequence is the full projection as well;
    // keep the phase scope so callers can tell what they asked for.
    img.phase_scope = scope_of(p);
    out.emplace(p, std::move(img));
  }
  return out;
}

PhaseEstimate estimate_phases(const DsaSequence &seq) {
  seq.validate();
  const int T = seq.frame_count();
  if (T < 4)
    throw Error("estimate_phases: need at least 4 frames, got " +
                std::to_string(T));

  const auto &first = seq.frames.front();
  const auto [lo, hi] = std::minmax_element(first.pixels().begin(),
                                            first.pixels().end());
  const double theta = std::max(1.0, 0.10 * static_cast<double>(*hi - *lo));

  // Per-pixel brightest value over time is the contrast-free reference; it
  // equals frame 0 when frame 0 carries no contrast.
  Image16 baseline = first;
  for (const auto &f : seq.frames) {
    auto b = baseline.pixels();
    const auto src = f.pixels();
    for (std::size_t i = 0; i < b.size(); ++i)
      b[i] = std::max(b[i], src[i]);
  }

  const std::size_t n = first.size();
  std::vector<long> count(static_cast<std::size_t>(T), 0);
  for (int t = 0; t < T; ++t) {
    const auto src = seq.frames[static_cast<std::size_t>(t)].pixels();
    const auto b = baseline.pixels();
    long c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<double>(src[i]) < static_cast<double>(b[i]) - theta)
        ++c;
    count[static_cast<std::size_t>(t)] = c;
  }

  PhaseEstimate est;
  est.threshold = theta;
  est.opacity_curve.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    est.opacity_curve[static_cast<std::size_t>(t)] =
        static_cast<double>(count[static_cast<std::size_t>(t)]) /
        static_cast<double>(n);

  const double onset_level = 0.01 * static_cast<double>(n);
  const auto peak_it = std::max_element(count.begin(), count.end());
  const int peak = static_cast<int>(peak_it - count.begin());
  const long cmax = *peak_it;

  est.boundaries.labels.assign(static_cast<std::size_t>(T), Phase::NonContrast);
  if (static_cast<double>(cmax) < onset_level) {
    est.no_contrast = true;
    return est;
  }

  int onset = 0;
  while (static_cast<double>(count[static_cast<std::size_t>(onset)]) < onset_level)
    ++onset;

  int rise = onset;
  long best_rise = std::numeric_limits<long>::min();
  for (int t = onset; t <= peak; ++t) {
    const long prev = t == 0 ? 0 : count[static_cast<std::size_t>(t - 1)];
    const long d = count[static_cast<std::size_t>(t)] - prev;
    if (d > best_rise) {
      best_rise = d;
      rise = t;
    }
  }
  int cap_start = rise;
  if (cap_start == onset && peak > onset)
    cap_start = onset + 1;

  int ven_start = T;
  for (int t = peak + 1; t < T; ++t)
    if (static_cast<double>(count[static_cast<std::size_t>(t)]) <
        0.8 * static_cast<double>(cmax)) {
      ven_start = t;
      break;
    }

  for (int t = 0; t < T; ++t) {
    Phase p = Phase::NonContrast;
    if (t >= ven_start)
      p = Phase::Venous;
    else if (t >= cap_start)
      p = Phase::Capillary;
    else if (t >= onset)
      p = Phase::Arterial;
    est.boundaries.labels[static_cast<std::size_t>(t)] = p;
  }
  return est;
}

std::uint16_t border_background(const Image16 &img) {
  if (img.empty())
    return 0;
  std::vector<std::uint16_t> ring;
  const int w = img.width(), h = img.height();
  for (int x = 0; x < w; ++x) {
    ring.push_back(img(x, 0));
    if (h > 1)
      ring.push_back(img(x, h - 1));
  }
  for (int y = 1; y + 1 < h; ++y) {
    ring.push_back(img(0, y));
    if (w > 1)
      ring.push_back(img(w - 1, y));
  }
  auto mid = ring.begin() + static_cast<std::ptrdiff_t>(ring.size() / 2);
  std::nth_element(ring.begin(), mid, ring.end());
  return *mid;
}

namespace {

void require_resizable(Shape s) {
  if (s.width < 2 || s.height < 2)
    throw Error("standardize: degenerate input " + to_string(s) +
                " (each dimension must be >= 2)");
}

template <typename T> Grid<T> letterbox(const Grid<T> &img, T pad) {
  const int side = std::max(img.width(), img.height());
  if (img.width() == side && img.height() == side)
    return img;
  Grid<T> out(side, side, pad);
  const int ox = (side - img.width()) / 2;
  const int oy = (side - img.height()) / 2;
  for (int y = 0; y < img.height(); ++y)
    std::copy(img.row(y).begin(), img.row(y).end(),
              out.row(y + oy).begin() + ox);
  return out;
}

} // namespace

Image16 resize_bilinear(const Image16 &img, int width, int height) {
  if (img.width() == width && img.height() == height)
    return img;
  Image16 out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  const int xmax = img.width() - 1, ymax = img.height() - 1;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(ymax));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, ymax);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(xmax));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, xmax);
      const double wx = fx - x0;
      const double top = img(x0, y0) + wx * (img(x1, y0) - img(x0, y0));
      const double bot = img(x0, y1) + wx * (img(x1, y1) - img(x0, y1));
      const double v = top + wy * (bot - top);
      out(x, y) = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L));
    }
  }
  return out;
}

Grid<std::uint8_t> resize_nearest(const Grid<std::uint8_t> &img, int width,
                                  int height) {
  if (img.width() == width && img.height() == height)
    return img;
  Grid<std::uint8_t> out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const int srcy = std::min(static_cast<int>((y + 0.5) * sy), img.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int srcx = std::min(static_cast<int>((x + 0.5) * sx), img.width() - 1);
      out(x, y) = img(srcx, srcy);
    }
  }
  return out;
}

Image16 standardize(const Image16 &img, StandardizeOptions opt) {
  require_resizable(img.shape());
  const Image16 square = letterbox(img, border_background(img));
  return resize_bilinear(square, opt.size, opt.size);
}

MinIpImage standardize(const MinIpImage &img, StandardizeOptions opt) {
  MinIpImage out = img;
  out.pixels = standardize(img.pixels, opt);
  return out;
}

TerritoryMask standardize(const TerritoryMask &mask, StandardizeOptions opt) {
  require_resizable(mask.shape());
  const auto square = letterbox(mask.labels(), std::uint8_t{0});
  return TerritoryMask(resize_nearest(square, opt.size, opt.size));
}

} // namespace vterr::minip

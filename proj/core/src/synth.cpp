#include "vterr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "vterr/distance.hpp"
#include "vterr/io.hpp"
#include "vterr/manifest.hpp"
#include "vterr/maskops.hpp"

namespace vterr::synth {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

// Portable draws: std distributions are implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

private:
  std::mt19937_64 g_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Wobble {
  double amp = 0.0, freq = 1.0, phase = 0.0;
  double operator()(double t) const { return amp * std::sin(freq * t + phase); }
};

struct Segment {
  double x0, y0, x1, y1, width;
  int depth;
  int subtree; // 0 trunk, 1/2 = the two first-generation subtrees
  Label territory;
};

// Territory layout, in pixel units of the canvas.
struct Anatomy {
  View view = View::AP;
  int canvas = 512;
  double cx = 0, cy = 0;   // skull center
  double ax = 0, ay = 0;   // outer skull semi-axes
  double thick = 0;
  double a = 0, b = 0;     // brain semi-axes
  Wobble brain, cut1, cut2, split;
  double j1 = 0, j2 = 0, j3 = 0;

  [[nodiscard]] Label label(double x, double y) const {
    const double u = (x - cx) / a, v = (y - cy) / b;
    const double r = 0.93 + brain(2.0 * std::atan2(v, u));
    if (u * u + v * v > r * r)
      return Label::Background;
    if (view == View::AP) {
      if (u < 0.04 + j1 + cut1(v) || v > 0.32 + j2 + cut2(u))
        return Label::Background;
      return u < 0.30 + j3 - 0.10 * v + split(v) ? Label::ACA : Label::MCA;
    }
    if (u > 0.38 + j1 + cut1(v) || v > 0.30 + j2 + cut2(u))
      return Label::Background;
    return v < -0.45 + j3 + 0.10 * u + split(u) ? Label::ACA : Label::MCA;
  }
  [[nodiscard]] double px(double u) const { return cx + u * a; }
  [[nodiscard]] double py(double v) const { return cy + v * b; }
};

Anatomy make_anatomy(std::uint64_t seed, View view, int canvas, double var,
                     const SkullParams &sk) {
  Rng r(mix(seed, view == View::AP ? 0xA9 : 0x1A7));
  Anatomy an;
  an.view = view;
  an.canvas = canvas;
  const double n = canvas;
  an.cx = n * (0.5 + var * r.uniform(-0.03, 0.03));
  an.cy = n * (0.5 + var * r.uniform(-0.03, 0.03));
  an.ax = n * sk.axis_x * (1.0 + var * r.uniform(-0.05, 0.05));
  an.ay = n * sk.axis_y * (1.0 + var * r.uniform(-0.05, 0.05));
  an.thick = n * sk.thickness;
  an.a = an.ax - an.thick;
  an.b = an.ay - an.thick;
  auto wob = [&](double amp, double f0, double f1) {
    return Wobble{var * amp * r.uniform(0.5, 1.0), r.uniform(f0, f1),
                  r.uniform(0.0, 2.0 * kPi)};
  };
  an.brain = wob(0.02, 2.0, 3.0);
  an.cut1 = wob(0.03, 2.0, 4.0);
  an.cut2 = wob(0.05, 2.0, 4.0);
  an.split = wob(0.05, 3.0, 5.0);
  an.j1 = var * r.uniform(-0.03, 0.03);
  an.j2 = var * r.uniform(-0.04, 0.04);
  an.j3 = var * r.uniform(-0.05, 0.05);
  return an;
}

TerritoryMask rasterize(const Anatomy &an) {
  TerritoryMask m(Shape{an.canvas, an.canvas});
  for (int y = 0; y < an.canvas; ++y)
    for (int x = 0; x < an.canvas; ++x)
      m.set(x, y, an.label(x, y));
  return m;
}

struct TreeGrower {
  const TerritoryMask &mask;
  const TreeParams &p;
  Rng &rng;
  double scale;
  std::vector<Segment> &out;

  bool allowed(double x, double y, Label own, bool trunk) const {
    const int ix = static_cast<int>(std::lround(x)), iy = static_cast<int>(std::lround(y));
    if (!mask.labels().contains(ix, iy))
      return false;
    const Label l = mask.at(ix, iy);
    return trunk ? l != Label::Background : l == own;
  }

  void grow(double x, double y, double angle, double len, double width, int depth,
            int subtree, Label own, int max_depth) {
    const bool trunk = depth == 0;
    double ex = x + len * std::cos(angle), ey = y + len * std::sin(angle);
    if (!allowed(ex, ey, own, trunk) || !allowed(0.5 * (x + ex), 0.5 * (y + ey), own, trunk)) {
      len *= 0.55;
      ex = x + len * std::cos(angle);
      ey = y + len * std::sin(angle);
      if (!allowed(ex, ey, own, trunk))
        return;
    }
    out.push_back({x, y, ex, ey, width, depth, subtree, own});
    if (depth >= max_depth)
      return;
    const double spread = p.branch_angle_deg * kPi / 180.0;
    const double jit = p.angle_jitter_deg * kPi / 180.0;
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? -1.0 : 1.0;
      const double ang = angle + sign * spread + rng.uniform(-jit, jit);
      const double l = len * p.length_decay * rng.uniform(0.9, 1.1);
      grow(ex, ey, ang, l, width * p.width_decay, depth + 1,
           depth == 0 ? side + 1 : subtree, own, max_depth);
    }
  }
};

struct Root {
  double u, v, dx, dy;
};

void grow_arteries(const Anatomy &an, const TerritoryMask &mask, const TreeParams &p,
                   Rng &rng, std::vector<Segment> &out) {
  const double scale = an.canvas / 512.0;
  TreeGrower g{mask, p, rng, scale, out};
  Root mca, aca;
  if (an.view == View::AP) {
    mca = {0.24, 0.22, 1.0, -0.35};
    aca = {0.14, 0.22, 0.1, -1.0};
  } else {
    mca = {-0.40, 0.24, 0.25, -1.0};
    aca = {-0.72, -0.38, 1.0, -0.35};
  }
  for (auto [root, lab] : {std::pair{mca, Label::MCA}, std::pair{aca, Label::ACA}}) {
    const double ang = std::atan2(root.dy, root.dx) + rng.uniform(-0.1, 0.1);
    g.grow(an.px(root.u), an.py(root.v), ang, 0.28 * an.a, p.root_width * scale, 0, 0,
           lab, p.depth);
  }
}

void grow_veins(const Anatomy &an, const TerritoryMask &mask, const TreeParams &p,
                Rng &rng, std::vector<Segment> &out) {
  const double scale = an.canvas / 512.0;
  TreeParams vp = p;
  vp.depth = 4;
  TreeGrower g{mask, vp, rng, scale, out};
  for (Label lab : {Label::MCA, Label::ACA}) {
    double sx = 0, sy = 0, n = 0;
    int top = an.canvas;
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x)
        if (mask.at(x, y) == lab) {
          sx += x;
          sy += y;
          n += 1;
          top = std::min(top, y);
        }
    if (n == 0)
      continue;
    const double x0 = sx / n, y0 = top + 0.35 * (sy / n - top);
    if (!g.allowed(x0, y0, lab, false))
      continue;
    g.grow(x0, y0, kPi / 2 + rng.uniform(-0.3, 0.3), 0.18 * an.a,
           0.7 * p.root_width * scale, 1, 0, lab, 4);
  }
}

// Soft capsule rasterisation; opacity is the max over segments and `depth`
// keeps the shallowest generation covering each pixel.
void draw(const std::vector<Segment> &segs, Grid<float> &op, Grid<std::uint8_t> *depth) {
  for (const auto &s : segs) {
    const double hw = 0.5 * s.width;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - hw - 1)));
    const int x1 = std::min(op.width() - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + hw + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - hw - 1)));
    const int y1 = std::min(op.height() - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + hw + 1)));
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = std::max(dx * dx + dy * dy, 1e-12);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double t = std::clamp(((x - s.x0) * dx + (y - s.y0) * dy) / len2, 0.0, 1.0);
        const double d = std::hypot(x - (s.x0 + t * dx), y - (s.y0 + t * dy));
        const float o = static_cast<float>(std::clamp(hw + 0.5 - d, 0.0, 1.0));
        if (o <= 0.0f)
          continue;
        if (o > op(x, y))
          op(x, y) = o;
        if (depth && (*depth)(x, y) > s.depth)
          (*depth)(x, y) = static_cast<std::uint8_t>(s.depth);
      }
  }
}

Grid<float> box_blur(const Grid<float> &in, int r) {
  const int w = in.width(), h = in.height();
  Grid<float> tmp(in.shape()), out(in.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k, ++n)
        s += in(k, y);
      tmp(x, y) = static_cast<float>(s / n);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int k = std::max(0, y - r); k <= std::min(h - 1, y + r); ++k, ++n)
        s += tmp(x, k);
      out(x, y) = static_cast<float>(s / n);
    }
  return out;
}

void validate(const PhantomSpec &s) {
  if (s.canvas < 64)
    throw Error("phantom canvas must be at least 64 px");
  const auto &b = s.bolus;
  if (b.non_contrast_frames < 0 || b.arterial_frames < 0 || b.capillary_frames < 0 ||
      b.venous_frames < 0)
    throw Error("phase frame counts must be non-negative");
  if (b.total() < 1)
    throw Error("phantom needs at least one frame");
  if (b.attenuation < 0 || s.noise < 0 || s.motion < 0 || s.variability < 0)
    throw Error("attenuation, noise, motion and variability must be non-negative");
  if (s.tree.depth < 0 || s.tree.depth > 10)
    throw Error("tree depth must lie in [0, 10]");
  if (s.background < 0 || s.background > 65535)
    throw Error("background outside the 16-bit range");
}

struct Schedule {
  Phase phase;
  double progress;  // arterial filling, 0..1 within the arterial run
  double arteries;  // global artery opacity
  double blush;
  double veins;
};

std::vector<Schedule> schedule(const BolusParams &b) {
  std::vector<Schedule> out;
  for (int k = 0; k < b.non_contrast_frames; ++k)
    out.push_back({Phase::NonContrast, 0, 0, 0, 0});
  for (int k = 0; k < b.arterial_frames; ++k)
    out.push_back({Phase::Arterial, double(k + 1) / b.arterial_frames, 1.0, 0, 0});
  for (int k = 0; k < b.capillary_frames; ++k)
    out.push_back({Phase::Capillary, 1.0, 0.6, 0.35, 0});
  for (int k = 0; k < b.venous_frames; ++k) {
    const double f = b.venous_frames > 1 ? double(k) / (b.venous_frames - 1) : 0.0;
    out.push_back({Phase::Venous, 1.0, 0.15 * (1.0 - f), k == 0 ? 0.15 : 0.0,
                   0.7 - 0.3 * f});
  }
  return out;
}

} // namespace

Phantom generate(const PhantomSpec &spec) {
  validate(spec);
  const int n = spec.canvas;
  const Anatomy an = make_anatomy(spec.seed, spec.view, n, spec.variability, spec.skull);
  TerritoryMask truth = rasterize(an);

  const BinaryMask mca = truth.mca(), aca = truth.aca();
  for (std::size_t i = 0; i < mca.size(); ++i)
    if (mca.pixels()[i] && aca.pixels()[i])
      throw Error("phantom territories overlap");
  if (mca.none() || aca.none())
    throw Error("phantom territory came out empty");

  Rng tree_rng(mix(spec.seed, spec.view == View::AP ? 0x7EE : 0x7EF));
  std::vector<Segment> arteries, veins;
  grow_arteries(an, truth, spec.tree, tree_rng, arteries);
  grow_veins(an, truth, spec.tree, tree_rng, veins);

  // Perfusion deficit before treatment.
  BinaryMask unperfused(truth.shape());
  auto suppressed = [&](const Segment &s) {
    if (spec.stage != Stage::PreEvt)
      return false;
    switch (spec.occlusion) {
    case Occlusion::ICA: return true;
    case Occlusion::M1: return s.territory == Label::MCA;
    case Occlusion::M2: return s.territory == Label::MCA && s.subtree == 2;
    }
    return false;
  };
  if (spec.stage == Stage::PreEvt) {
    if (spec.occlusion == Occlusion::ICA) {
      unperfused = truth.ica();
    } else if (spec.occlusion == Occlusion::M1) {
      unperfused = mca;
    } else {
      BinaryMask s1(truth.shape()), s2(truth.shape());
      Grid<float> o1(truth.shape(), 0.f), o2(truth.shape(), 0.f);
      std::vector<Segment> a1, a2;
      for (const auto &s : arteries)
        if (s.territory == Label::MCA && s.subtree == 1) a1.push_back(s);
        else if (s.territory == Label::MCA && s.subtree == 2) a2.push_back(s);
      draw(a1, o1, nullptr);
      draw(a2, o2, nullptr);
      for (std::size_t i = 0; i < o1.size(); ++i) {
        s1.pixels()[i] = o1.pixels()[i] > 0.5f;
        s2.pixels()[i] = o2.pixels()[i] > 0.5f;
      }
      if (!s2.none()) {
        const auto d1 = squared_distance_transform(s1);
        const auto d2 = squared_distance_transform(s2);
        for (std::size_t i = 0; i < mca.size(); ++i)
          unperfused.pixels()[i] = mca.pixels()[i] && d2.pixels()[i] < d1.pixels()[i];
      }
    }
  }

  std::vector<Segment> live_arteries;
  for (const auto &s : arteries)
    if (!suppressed(s))
      live_arteries.push_back(s);

  Grid<float> art(truth.shape(), 0.f), ven(truth.shape(), 0.f);
  Grid<std::uint8_t> art_depth(truth.shape(), 255);
  draw(live_arteries, art, &art_depth);
  draw(veins, ven, nullptr);

  Grid<float> perf(truth.shape(), 0.f);
  const BinaryMask ica = truth.ica();
  for (std::size_t i = 0; i < perf.size(); ++i)
    perf.pixels()[i] = ica.pixels()[i] && !unperfused.pixels()[i] ? 1.f : 0.f;
  const int br = std::max(1, n / 170);
  Grid<float> blush = box_blur(box_blur(perf, br), br);
  Grid<float> perf_soft = box_blur(perf, br);
  for (std::size_t i = 0; i < ven.size(); ++i)
    ven.pixels()[i] *= perf_soft.pixels()[i];

  // Residual skull ring from mask/frame misregistration; fixed per run.
  Rng motion_rng(mix(spec.seed, mix(static_cast<std::uint64_t>(spec.view),
                                    0x5C0 + static_cast<std::uint64_t>(spec.stage))));
  const double mdx = motion_rng.uniform(-spec.motion, spec.motion);
  const double mdy = motion_rng.uniform(-spec.motion, spec.motion);
  const double ring_amp = spec.skull.attenuation * std::min(1.0, spec.motion / 2.0);
  Grid<float> ring(truth.shape(), 0.f);
  if (ring_amp > 0) {
    const double half = 0.5 * an.thick;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double u = (x - an.cx - mdx) / an.ax, v = (y - an.cy - mdy) / an.ay;
        const double rho = std::sqrt(u * u + v * v);
        const double dist = std::fabs(rho - (1.0 - half / an.ax)) * an.ax;
        ring(x, y) = static_cast<float>(std::clamp(1.0 - dist / (half + 1.0), 0.0, 1.0));
      }
  }

  Rng noise_rng(mix(spec.seed, mix(0x4E015E + static_cast<std::uint64_t>(spec.view),
                                   static_cast<std::uint64_t>(spec.stage))));
  Grid<float> noise(truth.shape(), 0.f);
  if (spec.noise > 0)
    for (auto &v : noise.pixels())
      v = static_cast<float>(spec.noise * noise_rng.normal());

  Grid<float> base(truth.shape());
  for (std::size_t i = 0; i < base.size(); ++i)
    base.pixels()[i] = static_cast<float>(spec.background - ring_amp * ring.pixels()[i] +
                                          noise.pixels()[i]);

  const auto sched = schedule(spec.bolus);
  const double A = spec.bolus.attenuation;
  const int levels = spec.tree.depth + 1;
  Phantom out;
  out.truth = std::move(truth);
  out.sequence.view = spec.view;
  out.sequence.stage = spec.stage;
  out.sequence.occlusion = spec.occlusion;
  out.sequence.patient_id =
      spec.patient_id.empty() ? "synth_" + std::to_string(spec.seed) : spec.patient_id;
  for (const auto &f : sched) {
    out.phases.labels.push_back(f.phase);
    Image16 frame(Shape{n, n});
    const double reach = 2.0 * f.progress * levels;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      double dark = 0;
      if (f.arteries > 0 && art.pixels()[i] > 0) {
        const double lvl = f.phase == Phase::Arterial
                               ? std::clamp(reach - art_depth.pixels()[i], 0.0, 1.0)
                               : 1.0;
        dark += f.arteries * lvl * art.pixels()[i];
      }
      dark += f.blush * blush.pixels()[i] + f.veins * ven.pixels()[i];
      const double v = base.pixels()[i] - A * dark;
      frame.pixels()[i] = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L));
    }
    out.sequence.frames.push_back(std::move(frame));
  }
  if (spec.annotate_phases)
    out.sequence.phase_labels = out.phases.labels;
  out.sequence.validate();
  return out;
}

TerritoryMask mean_anatomy(View view, int canvas) {
  SkullParams sk;
  return rasterize(make_anatomy(0, view, canvas, 0.0, sk));
}

Phantom perturb(const Phantom &p, const AffineTransform2D &t) {
  Phantom out = p;
  const AffineMatrix m = to_matrix(t, Center::of(p.sequence.shape()));
  for (auto &f : out.sequence.frames)
    f = warp(f, m);
  out.truth = warp_mask(p.truth, m);
  return out;
}

std::size_t dark_pixels(const Image16 &img, double background, double threshold) {
  std::size_t n = 0;
  for (auto v : img.pixels())
    if (v < background - threshold)
      ++n;
  return n;
}

StandardCase standard_case(const Phantom &p) {
  return {minip::standardize(minip::compute_minip(p.sequence)), minip::standardize(p.truth)};
}

TerritoryMask evidence_segmentation(const MinIpImage &minip, const TerritoryMask &prior) {
  const Image16 &img = minip.pixels;
  require_same_shape(img.shape(), prior.shape(), "evidence_segmentation");
  const double bg = minip::border_background(img);
  std::vector<std::uint16_t> v(img.pixels().begin(), img.pixels().end());
  const auto k = static_cast<std::ptrdiff_t>(v.size() / 200);
  std::nth_element(v.begin(), v.begin() + k, v.end());
  const double tau = std::max(1.0, 0.1 * (bg - v[static_cast<std::size_t>(k)]));

  BinaryMask ev(img.shape());
  for (std::size_t i = 0; i < ev.size(); ++i)
    ev.pixels()[i] = img.pixels()[i] < bg - tau;
  ev = maskops::dilate(maskops::erode(ev, 1), 1);
  const int r = std::max(2, img.width() / 16);
  // Keeps every component at least a tenth the size of the largest.
  const auto comps = maskops::connected_components(
      maskops::erode(maskops::dilate(ev, r), r), maskops::Connectivity::Eight);
  BinaryMask kept(img.shape());
  if (comps.count() > 0) {
    const std::size_t big = *std::max_element(comps.areas.begin(), comps.areas.end());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const int l = comps.labels.pixels()[i];
      kept.pixels()[i] = l > 0 && 10 * comps.areas[static_cast<std::size_t>(l - 1)] >= big;
    }
  }
  BinaryMask ica = maskops::fill_holes(kept);
  if (ica.count() < ica.size() / 100)
    ica = prior.ica();

  const auto dm = squared_distance_transform(prior.mca());
  const auto da = squared_distance_transform(prior.aca());
  TerritoryMask out(img.shape());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (ica.at(x, y))
        out.set(x, y, dm(x, y) <= da(x, y) ? Label::MCA : Label::ACA);
  return out;
}

TerritoryMask simulated_model_prediction(const TerritoryMask &truth, std::uint64_t seed,
                                         int radius) {
  Rng r(mix(seed, 0x30DE1));
  const double scale = truth.width() / 1024.0;
  auto jitter = [&](BinaryMask m) {
    // Bumps and dents at random boundary points.
    std::vector<std::pair<int, int>> edge;
    for (int y = 1; y + 1 < m.height(); ++y)
      for (int x = 1; x + 1 < m.width(); ++x)
        if (m.at(x, y) && (!m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1)))
          edge.emplace_back(x, y);
    if (edge.empty())
      return m;
    BinaryMask out = m;
    for (int k = 0; k < 40; ++k) {
      const auto [ex, ey] = edge[static_cast<std::size_t>(r.uniform() * edge.size()) % edge.size()];
      const double rad = scale * r.uniform(3.0, 10.0);
      const bool add = r.uniform() < 0.5;
      const int ir = static_cast<int>(std::ceil(rad));
      for (int dy = -ir; dy <= ir; ++dy)
        for (int dx = -ir; dx <= ir; ++dx)
          if (dx * dx + dy * dy <= rad * rad && out.contains(ex + dx, ey + dy))
            out.set(ex + dx, ey + dy, add);
    }
    return out;
  };
  const BinaryMask ica = jitter(truth.ica());
  BinaryMask mca = jitter(truth.mca());
  // One-pixel misalignment of the two annotations leaves seams in ICA - MCA.
  const int shift = r.uniform() < 0.5 ? 1 : -1;
  BinaryMask shifted(mca.shape());
  for (int y = 0; y < mca.height(); ++y)
    for (int x = 0; x < mca.width(); ++x)
      if (mca.contains(x - shift, y) && mca.at(x - shift, y))
        shifted.set(x, y);
  for (std::size_t i = 0; i < shifted.size(); ++i)
    shifted.pixels()[i] = shifted.pixels()[i] && ica.pixels()[i];
  return maskops::derive_label_map(ica, shifted, maskops::MorphologyParams::with_radius(radius))
      .labels;
}

std::vector<reg::AtlasEntry> make_atlas_library(int count, std::uint64_t base_seed) {
  if (count < 1)
    throw Error("atlas library needs at least one entry");
  std::vector<reg::AtlasEntry> lib;
  for (int i = 0; i < count; ++i) {
    PhantomSpec s;
    s.seed = base_seed + static_cast<std::uint64_t>(i);
    s.view = i % 2 == 0 ? View::AP : View::Lateral;
    s.stage = Stage::PostEvt;
    const auto sc = standard_case(generate(s));
    char id[32];
    std::snprintf(id, sizeof id, "atlas_%02d", i);
    lib.push_back({id, s.view, sc.minip, sc.truth});
  }
  return lib;
}

std::vector<CohortSlot> cohort_layout(const CohortOptions &opt) {
  if (opt.cases < 1)
    throw Error("cohort needs at least one case");
  if (opt.acquisitions_per_patient < 1 || opt.acquisitions_per_patient > 4)
    throw Error("acquisitions per patient must lie in [1, 4]");
  static constexpr std::pair<View, Stage> kAcq[] = {{View::AP, Stage::PostEvt},
                                                    {View::Lateral, Stage::PostEvt},
                                                    {View::AP, Stage::PreEvt},
                                                    {View::Lateral, Stage::PreEvt}};
  std::vector<CohortSlot> out;
  for (int p = 0; static_cast<int>(out.size()) < opt.cases; ++p) {
    Rng r(mix(opt.seed, 0xC0407 + static_cast<std::uint64_t>(p)));
    const double u = r.uniform();
    const Occlusion occ = u < 0.15 ? Occlusion::ICA : u < 0.70 ? Occlusion::M1 : Occlusion::M2;
    const std::uint64_t seed = mix(opt.seed, static_cast<std::uint64_t>(p)) >> 16;
    char pid[32];
    std::snprintf(pid, sizeof pid, "p%03d", p);
    for (int a = 0; a < opt.acquisitions_per_patient &&
                    static_cast<int>(out.size()) < opt.cases;
         ++a) {
      char cid[32];
      std::snprintf(cid, sizeof cid, "c%04d", static_cast<int>(out.size()));
      out.push_back({cid, pid, seed, kAcq[a].first, kAcq[a].second, occ});
    }
  }
  return out;
}

PhantomSpec spec_for(const CohortSlot &slot) {
  PhantomSpec s;
  s.seed = slot.seed;
  s.view = slot.view;
  s.stage = slot.stage;
  s.occlusion = slot.occlusion;
  s.patient_id = slot.patient_id;
  return s;
}

std::filesystem::path write_cohort(const CohortOptions &opt, const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  report::CohortManifest m;
  m.base_dir = dir;
  std::map<View, TerritoryMask> priors;
  for (const auto &slot : cohort_layout(opt)) {
    const Phantom ph = generate(spec_for(slot));
    const auto sc = standard_case(ph);
    const fs::path cdir = dir / slot.case_id;
    fs::create_directories(cdir);
    CaseRecord rec;
    rec.case_id = slot.case_id;
    rec.patient_id = slot.patient_id;
    rec.view = slot.view;
    rec.stage = slot.stage;
    rec.occlusion = slot.occlusion;
    rec.minip = slot.case_id + "/minip.png";
    rec.reference = slot.case_id + "/reference.png";
    io::write_png16(dir / rec.minip, sc.minip.pixels);
    io::save_mask(sc.truth, dir / rec.reference);
    if (opt.with_sequences) {
      rec.sequence_dir = slot.case_id + "/sequence";
      io::save_sequence(ph.sequence, dir / rec.sequence_dir);
    }
    TerritoryMask model;
    if (opt.with_phase_outputs) {
      auto it = priors.find(slot.view);
      if (it == priors.end())
        it = priors.emplace(slot.view, minip::standardize(mean_anatomy(slot.view))).first;
      model = evidence_segmentation(sc.minip, it->second);
      for (const auto &[phase, pm] : minip::phase_minips(ph.sequence, ph.phases)) {
        const MinIpImage std_pm = minip::standardize(pm);
        const std::string name(to_string(phase));
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        rec.phase_minips[phase] = slot.case_id + "/minip_" + lower + ".png";
        rec.phase_predictions[phase] = slot.case_id + "/pred_" + lower + ".png";
        io::write_png16(dir / rec.phase_minips[phase], std_pm.pixels);
        io::save_mask(evidence_segmentation(std_pm, it->second),
                      dir / rec.phase_predictions[phase]);
      }
    } else {
      model = simulated_model_prediction(
          sc.truth, mix(slot.seed, 2 * static_cast<std::uint64_t>(slot.view) +
                                       static_cast<std::uint64_t>(slot.stage)));
    }
    rec.predictions[Method::Model] = slot.case_id + "/pred_model.png";
    io::save_mask(model, dir / rec.predictions[Method::Model]);
    m.cases.push_back(std::move(rec));
  }
  const fs::path path = dir / "manifest.json";
  report::save_manifest(m, path);
  return path;
}

} // namespace vterr::synth

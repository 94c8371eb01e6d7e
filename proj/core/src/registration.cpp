#include "vterr/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <atomic>
#include <future>
#include <nlohmann/json.hpp>
#include <thread>

#include "vterr/io.hpp"

namespace vterr::reg {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> GridRange::values() const {
  std::vector<double> out;
  if (step <= 0.0)
    return {lo};
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i)
    out.push_back(lo + i * step);
  return out;
}

namespace {

ImageF to_float(const Image16 &img) {
  ImageF out(img.shape());
  const auto s = img.pixels();
  auto d = out.pixels();
  for (std::size_t i = 0; i < s.size(); ++i)
    d[i] = static_cast<float>(s[i]);
  return out;
}

ImageF half(const ImageF &img) {
  ImageF out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      out(x, y) = 0.25f * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) +
                           img(2 * x, 2 * y + 1) + img(2 * x + 1, 2 * y + 1));
  return out;
}

bool has_variance(const Image16 &img) {
  const auto p = img.pixels();
  return std::any_of(p.begin(), p.end(), [&](std::uint16_t v) { return v != p[0]; });
}

struct Moments {
  double n = 0, sf = 0, sff = 0, sm = 0, smm = 0, sfm = 0;
  [[nodiscard]] double ncc() const {
    if (n < 2)
      return -1.0;
    const double cov = sfm - sf * sm / n;
    const double vf = sff - sf * sf / n;
    const double vm = smm - sm * sm / n;
    if (vf <= 1e-12 || vm <= 1e-12)
      return -1.0;
    return std::clamp(cov / std::sqrt(vf * vm), -1.0, 1.0);
  }
};

// One pyramid level: images at `size`, plus the fixed-image sample lattice.
struct Level {
  ImageF moving;
  ImageF fixed;
  int stride = 1;
  double factor = 1.0; // level pixels per full-resolution pixel
};

class Problem {
public:
  Problem(const Image16 &moving, const Image16 &fixed, const RegistrationOptions &opt)
      : opt_(opt), full_(fixed.shape()), center_(Center::of(fixed.shape())) {
    ImageF m = to_float(moving), f = to_float(fixed);
    std::vector<std::pair<ImageF, ImageF>> pyramid{{m, f}};
    for (int l = 1; l < opt.levels; ++l)
      pyramid.emplace_back(half(pyramid.back().first), half(pyramid.back().second));
    std::reverse(pyramid.begin(), pyramid.end());
    for (auto &[pm, pf] : pyramid) {
      Level lv;
      lv.factor = static_cast<double>(pm.width()) / full_.width;
      lv.stride = std::max(1, pm.width() / opt.refine_samples_per_axis);
      lv.moving = std::move(pm);
      lv.fixed = std::move(pf);
      levels_.push_back(std::move(lv));
    }
    // Coarse search runs on the coarsest level box-smoothed down to the grid
    // sample density.
    grid_ = levels_.front();
    while (grid_.moving.width() > opt.grid_samples_per_axis && grid_.moving.width() >= 4) {
      grid_.moving = half(grid_.moving);
      grid_.fixed = half(grid_.fixed);
    }
    grid_.factor = static_cast<double>(grid_.moving.width()) / full_.width;
    grid_.stride = 1;
  }

  [[nodiscard]] int level_count() const { return static_cast<int>(levels_.size()); }
  [[nodiscard]] const Level &level(int i) const { return levels_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const Level &grid_level() const { return grid_; }

  [[nodiscard]] double similarity(const Level &lv, const AffineTransform2D &t) const {
    if (!t.valid())
      return -1.0;
    // Level fixed coords -> full -> moving full (T^-1) -> level moving coords.
    const double k = lv.factor;
    const AffineMatrix to_full{1.0 / k, 0, 0.5 / k - 0.5, 0, 1.0 / k, 0.5 / k - 0.5};
    const AffineMatrix to_level{k, 0, 0.5 * k - 0.5, 0, k, 0.5 * k - 0.5};
    const AffineMatrix inv = to_matrix(t, center_).inverse();
    const AffineMatrix m = to_level.compose(inv.compose(to_full));

    const ImageF &mov = lv.moving;
    const ImageF &fix = lv.fixed;
    const double xmax = mov.width() - 1, ymax = mov.height() - 1;
    const int off = lv.stride / 2;
    Moments acc;
    double total = 0;
    for (int y = off; y < fix.height(); y += lv.stride) {
      double qx = m.a * off + m.b * y + m.c;
      double qy = m.d * off + m.e * y + m.f;
      const double dx = m.a * lv.stride, dy = m.d * lv.stride;
      const auto frow = fix.row(y);
      for (int x = off; x < fix.width(); x += lv.stride, qx += dx, qy += dy) {
        total += 1;
        if (qx < 0.0 || qy < 0.0 || qx > xmax || qy > ymax)
          continue;
        const double mv = bilinear(mov, qx, qy);
        const double fv = frow[static_cast<std::size_t>(x)];
        acc.n += 1;
        acc.sf += fv;
        acc.sff += fv * fv;
        acc.sm += mv;
        acc.smm += mv * mv;
        acc.sfm += fv * mv;
      }
    }
    if (acc.n < opt_.min_overlap * total)
      return -1.0;
    return acc.ncc();
  }

private:
  RegistrationOptions opt_;
  Shape full_;
  Center center_;
  std::vector<Level> levels_;
  Level grid_;
};

struct Candidate {
  AffineTransform2D t;
  double sim = -1.0;
};

struct Steps {
  double theta, scale, trans;
};

double &param(AffineTransform2D &t, int i) {
  switch (i) {
  case 0:
    return t.theta_deg;
  case 1:
    return t.sx;
  case 2:
    return t.sy;
  case 3:
    return t.tx;
  default:
    return t.ty;
  }
}

double step_of(const Steps &s, int i) {
  return i == 0 ? s.theta : (i <= 2 ? s.scale : s.trans);
}

// Coordinate descent with step halving. Returns sweeps used.
int refine(const Problem &prob, const Level &lv, Candidate &cand, Steps steps,
           const RegistrationOptions &opt, LevelTrace *trace) {
  constexpr int kMaxHalvings = 5;
  cand.sim = prob.similarity(lv, cand.t);
  if (trace)
    trace->accepted.push_back(cand.sim);
  int halvings = 0, sweeps = 0;
  while (sweeps < opt.max_iterations_per_level) {
    ++sweeps;
    const double start = cand.sim;
    for (int i = 0; i < 5; ++i) {
      const double h = step_of(steps, i);
      for (double dir : {+1.0, -1.0}) {
        // Keep walking while the direction pays off.
        for (;;) {
          Candidate trial = cand;
          param(trial.t, i) += dir * h;
          trial.sim = prob.similarity(lv, trial.t);
          if (trial.sim > cand.sim + 1e-12) {
            cand = trial;
            if (trace)
              trace->accepted.push_back(cand.sim);
          } else {
            break;
          }
        }
      }
    }
    if (cand.sim - start < opt.tolerance) {
      if (halvings == kMaxHalvings)
        break;
      ++halvings;
      steps.theta *= 0.5;
      steps.scale *= 0.5;
      steps.trans *= 0.5;
    }
  }
  return sweeps;
}

} // namespace

double ncc(const Image16 &a, const Image16 &b) {
  require_same_shape(a.shape(), b.shape(), "ncc");
  if (!has_variance(a) || !has_variance(b))
    throw Error("ncc: zero-variance image");
  Moments acc;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double x = pa[i], y = pb[i];
    acc.n += 1;
    acc.sf += x;
    acc.sff += x * x;
    acc.sm += y;
    acc.smm += y * y;
    acc.sfm += x * y;
  }
  return acc.ncc();
}

double ncc_under(const Image16 &moving, const Image16 &fixed,
                 const AffineTransform2D &transform) {
  require_same_shape(moving.shape(), fixed.shape(), "ncc_under");
  const AffineMatrix inv = to_matrix(transform, Center::of(fixed.shape())).inverse();
  Moments acc;
  const double xmax = moving.width() - 1, ymax = moving.height() - 1;
  for (int y = 0; y < fixed.height(); ++y)
    for (int x = 0; x < fixed.width(); ++x) {
      double qx, qy;
      inv.apply(x, y, qx, qy);
      if (qx < 0.0 || qy < 0.0 || qx > xmax || qy > ymax)
        continue;
      const double mv = bilinear(moving, qx, qy), fv = fixed(x, y);
      acc.n += 1;
      acc.sf += fv;
      acc.sff += fv * fv;
      acc.sm += mv;
      acc.smm += mv * mv;
      acc.sfm += fv * mv;
    }
  return acc.ncc();
}

RegistrationResult optimize(const Image16 &moving, const Image16 &fixed,
                            const RegistrationOptions &opt) {
  const auto t0 = std::chrono::steady_clock::now();
  require_same_shape(moving.shape(), fixed.shape(), "optimize");
  if (!has_variance(moving) || !has_variance(fixed))
    throw Error("optimize: zero-variance image");
  if (opt.levels < 1 || opt.seeds < 1)
    throw Error("optimize: need at least one level and one seed");

  const Problem prob(moving, fixed, opt);

  // Exhaustive coarse grid; keep the best `seeds` candidates.
  std::vector<Candidate> grid;
  const auto thetas = opt.theta_deg.values();
  const auto scales = opt.scale.values();
  const auto shifts = opt.translation.values();
  grid.reserve(thetas.size() * scales.size() * shifts.size() * shifts.size());
  for (double th : thetas)
    for (double s : scales)
      for (double ty : shifts)
        for (double tx : shifts) {
          Candidate c{{th, s, s, tx, ty}, 0.0};
          c.sim = prob.similarity(prob.grid_level(), c.t);
          grid.push_back(c);
        }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(opt.seeds), grid.size());
  std::partial_sort(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(k), grid.end(),
                    [](const Candidate &a, const Candidate &b) { return a.sim > b.sim; });
  grid.resize(k);

  RegistrationResult res;
  const Steps coarse{0.5 * opt.theta_deg.step, 0.5 * opt.scale.step,
                     0.5 * opt.translation.step};

  // All seeds are refined on the coarsest level; the best one continues.
  Candidate best;
  LevelTrace best_trace;
  for (Candidate &seed : grid) {
    LevelTrace trace{prob.level(0).moving.width(), {}};
    res.iterations += refine(prob, prob.level(0), seed, coarse, opt, &trace);
    if (seed.sim > best.sim) {
      best = seed;
      best_trace = std::move(trace);
    }
  }
  res.trace.push_back(std::move(best_trace));

  Steps steps = coarse;
  for (int l = 1; l < prob.level_count(); ++l) {
    steps.theta *= 0.25;
    steps.scale *= 0.25;
    steps.trans *= 0.25;
    LevelTrace trace{prob.level(l).moving.width(), {}};
    res.iterations += refine(prob, prob.level(l), best, steps, opt, &trace);
    res.trace.push_back(std::move(trace));
  }

  res.transform = best.t;
  res.similarity = best.sim;
  res.failed = best.sim < opt.failure_threshold;
  res.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

RegistrationResult optimize(const MinIpImage &moving, const MinIpImage &fixed,
                            const RegistrationOptions &opt) {
  return optimize(moving.pixels, fixed.pixels, opt);
}

AtlasRegistration register_best_atlas(const std::vector<AtlasEntry> &library,
                                      const MinIpImage &patient, View view,
                                      const RegistrationOptions &opt) {
  if (library.empty())
    throw Error("register_best_atlas: empty atlas library");
  std::vector<const AtlasEntry *> matched;
  for (const auto &e : library)
    if (e.view == view)
      matched.push_back(&e);
  if (matched.empty())
    throw Error("register_best_atlas: no atlas matches view " +
                std::string(to_string(view)));

  AtlasRegistration out;
  out.runs.resize(matched.size());
  unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(matched.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < matched.size(); ++i) {
      out.runs[i] = optimize(matched[i]->minip, patient, opt);
      out.runs[i].atlas_id = matched[i]->id;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < matched.size(); i = next++) {
          out.runs[i] = optimize(matched[i]->minip, patient, opt);
          out.runs[i].atlas_id = matched[i]->id;
        }
      }));
    for (auto &f : pool)
      f.get();
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.runs.size(); ++i) {
    const auto &r = out.runs[i], &b = out.runs[best];
    if (r.similarity > b.similarity ||
        (r.similarity == b.similarity && r.atlas_id < b.atlas_id))
      best = i;
  }
  out.best = out.runs[best];
  const AtlasEntry &atlas = *matched[best];
  out.warped_mask = warp_mask(atlas.masks, out.best.transform);
  if (out.warped_mask.shape() != patient.pixels.shape())
    throw ShapeMismatch("register_best_atlas: atlas and patient shapes differ");
  return out;
}

RegistrationResult register_pre_to_post(const MinIpImage &pre,
                                        const MinIpImage &post,
                                        const RegistrationOptions &opt) {
  return optimize(pre, post, opt);
}

std::vector<AtlasEntry> load_atlas_library(const fs::path &dir) {
  const fs::path index = dir / "atlas.json";
  std::ifstream in(index);
  if (!in)
    throw io::IoError("missing atlas index " + index.string());
  const json j = json::parse(in);
  std::vector<AtlasEntry> lib;
  for (const auto &e : j.at("atlases")) {
    AtlasEntry a;
    a.id = e.at("id").get<std::string>();
    a.view = parse_view(e.at("view").get<std::string>());
    a.minip.pixels = io::read_png16(dir / e.at("minip").get<std::string>());
    a.minip.phase_scope = PhaseScope::Full;
    a.masks = io::load_mask(dir / e.at("mask").get<std::string>());
    require_same_shape(a.minip.pixels.shape(), a.masks.shape(),
                       ("atlas " + a.id).c_str());
    lib.push_back(std::move(a));
  }
  return lib;
}

void save_atlas_library(const std::vector<AtlasEntry> &library, const fs::path &dir) {
  fs::create_directories(dir);
  json entries = json::array();
  for (const auto &a : library) {
    const std::string minip = a.id + "_minip.png", mask = a.id + "_mask.png";
    io::write_png16(dir / minip, a.minip.pixels);
    io::save_mask(a.masks, dir / mask);
    entries.push_back({{"id", a.id}, {"view", to_string(a.view)}, {"minip", minip}, {"mask", mask}});
  }
  std::ofstream out(dir / "atlas.json");
  out << json{{"schema_version", 1}, {"atlases", entries}}.dump(2) << "\n";
}

} // namespace vterr::reg

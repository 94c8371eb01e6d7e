#include "vterr/report.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "vterr/io.hpp"
#include "vterr/maskops.hpp"

namespace vterr::report {

using nlohmann::json;

namespace {

std::string upper(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  return u;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

std::vector<CaseRecord> select_cases(const CohortManifest &m, const ExperimentConfig &cfg) {
  std::vector<CaseRecord> cases;
  if (cfg.split) {
    if (m.splits.empty())
      throw Error("config selects a split but the manifest has none");
    cases = m.cases_in(*cfg.split);
  } else {
    cases = m.cases;
  }
  std::sort(cases.begin(), cases.end(),
            [](const CaseRecord &a, const CaseRecord &b) { return a.case_id < b.case_id; });
  return cases;
}

} // namespace

// ---- splits ------------------------------------------------------------------

SplitOutcome split_cohort(const CohortManifest &m, const SplitFractions &f, std::uint64_t seed) {
  if (m.cases.empty())
    throw Error("empty manifest");
  m.validate();
  const double fr[3] = {f.train, f.val, f.test};
  const double total = fr[0] + fr[1] + fr[2];
  if (fr[0] < 0 || fr[1] < 0 || fr[2] < 0 || !(total > 0))
    throw Error("split fractions must be non-negative with a positive sum");

  std::map<std::string, Occlusion> occ;
  for (const auto &c : m.cases)
    occ.emplace(c.patient_id, c.occlusion);
  const int P = static_cast<int>(occ.size());
  const int nonempty = static_cast<int>((fr[0] > 0) + (fr[1] > 0) + (fr[2] > 0));

  SplitOutcome out;
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto &[p, o] : occ)
    strata[std::string(to_string(o))].push_back(p);
  std::vector<std::string> pooled;
  for (auto it = strata.begin(); it != strata.end();) {
    if (static_cast<int>(it->second.size()) < nonempty) {
      out.warnings.push_back("stratum " + it->first + " has " +
                             std::to_string(it->second.size()) +
                             " patient(s); pooled with other small strata");
      pooled.insert(pooled.end(), it->second.begin(), it->second.end());
      it = strata.erase(it);
    } else {
      ++it;
    }
  }
  if (!pooled.empty())
    strata["POOLED"] = pooled;

  // Split sizes by largest remainder.
  int target[3];
  double rem[3];
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double q = P * fr[k] / total;
    target[k] = static_cast<int>(std::floor(q));
    rem[k] = q - target[k];
    assigned += target[k];
  }
  for (int left = P - assigned; left > 0; --left) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rem[k] > rem[best])
        best = k;
    ++target[best];
    rem[best] = -1.0;
  }

  // Per-stratum allocation: floor of the quota, then unit increments by
  // largest fractional part subject to both row and column totals.
  std::vector<std::string> keys;
  for (const auto &[k, v] : strata)
    keys.push_back(k);
  const std::size_t S = keys.size();
  std::vector<std::array<int, 3>> alloc(S, {0, 0, 0});
  std::vector<int> row_left(S);
  int col_left[3] = {target[0], target[1], target[2]};
  struct Frac {
    double frac;
    std::size_t s;
    int k;
  };
  std::vector<Frac> fracs;
  for (std::size_t s = 0; s < S; ++s) {
    const int ps = static_cast<int>(strata[keys[s]].size());
    int used = 0;
    for (int k = 0; k < 3; ++k) {
      const double q = P > 0 ? double(ps) * target[k] / P : 0.0;
      alloc[s][k] = static_cast<int>(std::floor(q));
      used += alloc[s][k];
      col_left[k] -= alloc[s][k];
      fracs.push_back({q - alloc[s][k], s, k});
    }
    row_left[s] = ps - used;
  }
  std::stable_sort(fracs.begin(), fracs.end(),
                   [](const Frac &a, const Frac &b) { return a.frac > b.frac; });
  for (const auto &fc : fracs)
    if (row_left[fc.s] > 0 && col_left[fc.k] > 0) {
      ++alloc[fc.s][fc.k];
      --row_left[fc.s];
      --col_left[fc.k];
    }
  for (std::size_t s = 0; s < S; ++s)
    for (int k = 0; k < 3 && row_left[s] > 0; ++k)
      while (row_left[s] > 0 && col_left[k] > 0) {
        ++alloc[s][k];
        --row_left[s];
        --col_left[k];
      }

  std::mt19937_64 g(seed);
  out.manifest = m;
  out.manifest.splits.clear();
  static constexpr Split kSplits[] = {Split::Train, Split::Val, Split::Test};
  for (std::size_t s = 0; s < S; ++s) {
    auto pats = strata[keys[s]];
    std::sort(pats.begin(), pats.end());
    for (std::size_t i = pats.size(); i > 1; --i)
      std::swap(pats[i - 1], pats[static_cast<std::size_t>(g() % i)]);
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < alloc[s][k]; ++c)
        out.manifest.splits[pats[pos++]] = kSplits[k];
  }
  return out;
}

// ---- configuration -------------------------------------------------------------

std::string_view to_string(Metric m) {
  switch (m) {
  case Metric::DSC: return "DSC";
  case Metric::JI: return "JI";
  case Metric::ASD: return "ASD";
  case Metric::HD: return "HD";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  const std::string u = upper(s);
  for (Metric m : kAllMetrics)
    if (to_string(m) == u)
      return m;
  if (u == "JACCARD") return Metric::JI;
  if (u == "DICE") return Metric::DSC;
  throw Error("unknown metric: " + std::string(s));
}

std::optional<double> metric_value(const metrics::TerritoryMetrics &t, Metric m) {
  if (!t.present)
    return std::nullopt;
  switch (m) {
  case Metric::DSC: return t.dsc;
  case Metric::JI: return t.ji;
  case Metric::ASD: return t.asd;
  case Metric::HD: return t.hd;
  }
  return std::nullopt;
}

bool higher_is_better(Metric m) { return m == Metric::DSC || m == Metric::JI; }

stats::TestKind ExperimentConfig::test_for(Metric m) const {
  auto it = tests.find(m);
  return it == tests.end() ? default_test : it->second;
}

void ExperimentConfig::validate(const CohortManifest &m) const {
  if (methods.empty())
    throw Error("config names no methods");
  for (Method me : methods) {
    const bool found = std::any_of(m.cases.begin(), m.cases.end(), [&](const CaseRecord &c) {
      return c.predictions.count(me) > 0;
    });
    if (!found)
      throw Error("method " + std::string(to_string(me)) + " has no predictions in the manifest");
  }
  auto paired = [](stats::TestKind k) {
    return k == stats::TestKind::Wilcoxon || k == stats::TestKind::PairedT;
  };
  if (!paired(default_test))
    throw Error("metric comparisons need a paired test (WILCOXON or PAIRED_T)");
  for (const auto &[metric, k] : tests)
    if (!paired(k))
      throw Error("metric comparisons need a paired test (WILCOXON or PAIRED_T)");
  if (cleanup_radius < 0)
    throw Error("cleanup radius must be non-negative");
}

ExperimentConfig parse_config(const json &j) {
  ExperimentConfig c;
  try {
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto &s : j.at("methods"))
        c.methods.push_back(parse_method(s.get<std::string>()));
    }
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto &s : j.at("metrics"))
        c.metrics.push_back(parse_metric(s.get<std::string>()));
    }
    if (j.contains("summary"))
      c.summary = stats::parse_summary_kind(j.at("summary").get<std::string>());
    if (j.contains("test"))
      c.default_test = stats::parse_test_kind(j.at("test").get<std::string>());
    if (j.contains("tests"))
      for (const auto &[k, v] : j.at("tests").items())
        c.tests[parse_metric(k)] = stats::parse_test_kind(v.get<std::string>());
    if (j.contains("phases")) {
      c.phases.clear();
      for (const auto &s : j.at("phases"))
        c.phases.push_back(parse_phase(s.get<std::string>()));
    }
    if (j.contains("phase_reference"))
      c.phase_reference = parse_phase(j.at("phase_reference").get<std::string>());
    if (j.contains("full_method"))
      c.full_method = parse_method(j.at("full_method").get<std::string>());
    if (j.contains("split"))
      c.split = parse_split(j.at("split").get<std::string>());
    c.atlas_library = j.value("atlas_library", "");
    c.cleanup_radius = j.value("cleanup_radius", 3);
    c.write_atlas_predictions = j.value("write_atlas_predictions", false);
    if (j.contains("registration")) {
      const auto &r = j.at("registration");
      auto &o = c.registration;
      o.seeds = r.value("seeds", o.seeds);
      o.max_iterations_per_level = r.value("max_iterations_per_level", o.max_iterations_per_level);
      o.tolerance = r.value("tolerance", o.tolerance);
      o.grid_samples_per_axis = r.value("grid_samples_per_axis", o.grid_samples_per_axis);
      o.refine_samples_per_axis = r.value("refine_samples_per_axis", o.refine_samples_per_axis);
      o.failure_threshold = r.value("failure_threshold", o.failure_threshold);
      o.threads = r.value("threads", o.threads);
    }
  } catch (const json::exception &e) {
    throw Error(std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw io::IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw io::IoError("malformed config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

// ---- per-case records ------------------------------------------------------------

namespace {

json territory_json(const metrics::TerritoryMetrics &t) {
  json j{{"present", t.present}, {"dsc", t.dsc}, {"ji", t.ji}};
  j["asd"] = t.asd ? json(*t.asd) : json(nullptr);
  j["hd"] = t.hd ? json(*t.hd) : json(nullptr);
  if (!t.note.empty())
    j["note"] = t.note;
  return j;
}

metrics::TerritoryMetrics territory_from(const json &j) {
  metrics::TerritoryMetrics t;
  t.present = j.at("present").get<bool>();
  t.dsc = j.at("dsc").get<double>();
  t.ji = j.at("ji").get<double>();
  if (!j.at("asd").is_null()) t.asd = j.at("asd").get<double>();
  if (!j.at("hd").is_null()) t.hd = j.at("hd").get<double>();
  t.note = j.value("note", "");
  return t;
}

json report_json(const metrics::OverlapReport &r) {
  return {{"ICA", territory_json(r.ica)}, {"MCA", territory_json(r.mca)}};
}

metrics::OverlapReport report_from(const json &j) {
  return {territory_from(j.at("ICA")), territory_from(j.at("MCA"))};
}

} // namespace

json to_json(const metrics::OverlapReport &r) { return report_json(r); }

json to_json(const CaseMetrics &c) {
  json j{{"schema_version", kSchemaVersion}, {"case_id", c.case_id}, {"patient_id", c.patient_id}};
  json m = json::object();
  for (const auto &[me, r] : c.methods)
    m[std::string(to_string(me))] = report_json(r);
  j["methods"] = m;
  json p = json::object();
  for (const auto &[ph, r] : c.phases)
    p[std::string(to_string(ph))] = report_json(r);
  j["phases"] = p;
  j["notes"] = c.notes;
  return j;
}

CaseMetrics case_metrics_from_json(const json &j) {
  CaseMetrics c;
  c.case_id = j.at("case_id").get<std::string>();
  c.patient_id = j.value("patient_id", "");
  for (const auto &[k, v] : j.at("methods").items())
    c.methods[parse_method(k)] = report_from(v);
  if (j.contains("phases"))
    for (const auto &[k, v] : j.at("phases").items())
      c.phases[parse_phase(k)] = report_from(v);
  if (j.contains("notes"))
    c.notes = j.at("notes").get<std::vector<std::string>>();
  return c;
}

void save_case_metrics(const std::vector<CaseMetrics> &cases, const std::filesystem::path &dir) {
  const auto cdir = dir / "cases";
  std::filesystem::create_directories(cdir);
  for (const auto &c : cases) {
    std::ofstream out(cdir / (c.case_id + ".json"));
    if (!out)
      throw io::IoError("cannot write " + (cdir / (c.case_id + ".json")).string());
    out << to_json(c).dump(2) << '\n';
  }
}

std::vector<CaseMetrics> load_case_metrics(const std::filesystem::path &dir) {
  std::vector<CaseMetrics> out;
  const auto cdir = dir / "cases";
  if (!std::filesystem::is_directory(cdir))
    throw io::IoError("no per-case records under " + dir.string());
  for (const auto &e : std::filesystem::directory_iterator(cdir)) {
    if (e.path().extension() != ".json")
      continue;
    std::ifstream in(e.path());
    json j;
    in >> j;
    out.push_back(case_metrics_from_json(j));
  }
  std::sort(out.begin(), out.end(),
            [](const CaseMetrics &a, const CaseMetrics &b) { return a.case_id < b.case_id; });
  return out;
}

// ---- aggregation ---------------------------------------------------------------

std::string Comparison::stars() const {
  return result ? std::string(stats::significance_stars(result->p_value)) : std::string();
}

namespace {

Cell make_cell(const std::vector<double> &v, stats::SummaryKind k) {
  Cell c;
  c.n = static_cast<int>(v.size());
  if (v.size() == 1)
    c.summary = stats::SummaryStat{k, v[0], v[0], v[0]};
  else if (!v.empty())
    c.summary = stats::summarize(v, k);
  return c;
}

Comparison compare(std::string label, Territory t, Metric m, const std::vector<double> &a,
                   const std::vector<double> &b, stats::TestKind kind) {
  Comparison c{std::move(label), t, m, std::nullopt, {}};
  try {
    c.result = kind == stats::TestKind::PairedT ? stats::paired_t(a, b)
                                                : stats::wilcoxon_signed_rank(a, b);
  } catch (const Error &e) {
    c.error = e.what();
  }
  return c;
}

void sort_cases(std::vector<CaseMetrics> &cases) {
  std::sort(cases.begin(), cases.end(),
            [](const CaseMetrics &a, const CaseMetrics &b) { return a.case_id < b.case_id; });
}

constexpr Territory kTerritories[] = {Territory::ICA, Territory::MCA};

} // namespace

Table1 compute_table1(std::vector<CaseMetrics> cases, const ExperimentConfig &cfg,
                      std::vector<Exclusion> excluded) {
  sort_cases(cases);
  Table1 t;
  t.summary = cfg.summary;
  t.metrics = cfg.metrics;
  t.excluded = std::move(excluded);
  for (Territory ter : kTerritories)
    for (Method me : cfg.methods) {
      Table1::Row row{ter, me, {}};
      for (Metric mt : cfg.metrics) {
        std::vector<double> v;
        for (const auto &c : cases) {
          auto it = c.methods.find(me);
          if (it == c.methods.end())
            continue;
          if (auto x = metric_value(it->second.row(ter), mt))
            v.push_back(*x);
        }
        row.cells[mt] = make_cell(v, cfg.summary);
      }
      t.rows.push_back(std::move(row));
    }
  for (std::size_t j = 1; j < cfg.methods.size(); ++j) {
    const Method a = cfg.methods[0], b = cfg.methods[j];
    const std::string label =
        std::string(to_string(a)) + " vs " + std::string(to_string(b));
    for (Territory ter : kTerritories)
      for (Metric mt : cfg.metrics) {
        std::vector<double> xa, xb;
        for (const auto &c : cases) {
          auto ia = c.methods.find(a), ib = c.methods.find(b);
          if (ia == c.methods.end() || ib == c.methods.end())
            continue;
          auto va = metric_value(ia->second.row(ter), mt);
          auto vb = metric_value(ib->second.row(ter), mt);
          if (va && vb) {
            xa.push_back(*va);
            xb.push_back(*vb);
          }
        }
        t.comparisons.push_back(compare(label, ter, mt, xa, xb, cfg.test_for(mt)));
      }
  }
  t.cases = std::move(cases);
  return t;
}

PhaseTable compute_phase_table(std::vector<CaseMetrics> cases, const ExperimentConfig &cfg,
                               std::vector<Exclusion> excluded) {
  sort_cases(cases);
  PhaseTable t;
  t.summary = cfg.summary;
  t.metrics = cfg.metrics;
  t.excluded = std::move(excluded);
  std::vector<Phase> present;
  for (Phase ph : cfg.phases) {
    const bool any = std::any_of(cases.begin(), cases.end(),
                                 [&](const CaseMetrics &c) { return c.phases.count(ph) > 0; });
    if (any)
      present.push_back(ph);
    else
      t.notes.push_back("phase " + std::string(to_string(ph)) +
                        " absent from every case; row omitted");
  }
  for (Territory ter : kTerritories)
    for (Phase ph : present) {
      PhaseTable::Row row{ph, ter, {}};
      for (Metric mt : cfg.metrics) {
        std::vector<double> v;
        for (const auto &c : cases) {
          auto it = c.phases.find(ph);
          if (it == c.phases.end())
            continue;
          if (auto x = metric_value(it->second.row(ter), mt))
            v.push_back(*x);
        }
        row.cells[mt] = make_cell(v, cfg.summary);
      }
      t.rows.push_back(std::move(row));
    }
  const bool have_ref =
      std::find(present.begin(), present.end(), cfg.phase_reference) != present.end();
  if (have_ref)
    for (Phase ph : present) {
      if (ph == cfg.phase_reference)
        continue;
      const std::string label = std::string(to_string(ph)) + " vs " +
                                std::string(to_string(cfg.phase_reference));
      for (Territory ter : kTerritories)
        for (Metric mt : cfg.metrics) {
          std::vector<double> xa, xb;
          for (const auto &c : cases) {
            auto ia = c.phases.find(ph), ib = c.phases.find(cfg.phase_reference);
            if (ia == c.phases.end() || ib == c.phases.end())
              continue;
            auto va = metric_value(ia->second.row(ter), mt);
            auto vb = metric_value(ib->second.row(ter), mt);
            if (va && vb) {
              xa.push_back(*va);
              xb.push_back(*vb);
            }
          }
          t.comparisons.push_back(compare(label, ter, mt, xa, xb, cfg.test_for(mt)));
        }
    }
  t.cases = std::move(cases);
  return t;
}

Table1 run_table1(const CohortManifest &m, const ExperimentConfig &cfg) {
  cfg.validate(m);
  const auto cases = select_cases(m, cfg);
  std::vector<std::optional<CaseMetrics>> results(cases.size());
  std::vector<std::string> reasons(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const CaseRecord &c = cases[i];
    if (c.reference.empty()) {
      reasons[i] = "missing reference";
      return;
    }
    for (Method me : cfg.methods)
      if (!c.predictions.count(me)) {
        reasons[i] = "missing " + std::string(to_string(me)) + " prediction";
        return;
      }
    try {
      const TerritoryMask ref = io::load_mask(m.resolve(c.reference));
      CaseMetrics cm{c.case_id, c.patient_id, {}, {}, {}};
      for (Method me : cfg.methods) {
        const TerritoryMask pred = io::load_mask(m.resolve(c.predictions.at(me)));
        if (pred.shape() != ref.shape()) {
          reasons[i] = std::string(to_string(me)) + " prediction shape " +
                       to_string(pred.shape()) + " differs from reference " +
                       to_string(ref.shape());
          return;
        }
        cm.methods[me] = metrics::overlap_report(pred, ref);
      }
      results[i] = std::move(cm);
    } catch (const Error &e) {
      reasons[i] = e.what();
    }
  });
  std::vector<CaseMetrics> ok;
  std::vector<Exclusion> excluded;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (results[i])
      ok.push_back(std::move(*results[i]));
    else
      excluded.push_back({cases[i].case_id, reasons[i]});
  }
  return compute_table1(std::move(ok), cfg, std::move(excluded));
}

PhaseTable run_phase_analysis(const CohortManifest &m, const ExperimentConfig &cfg) {
  const auto cases = select_cases(m, cfg);
  std::vector<std::optional<CaseMetrics>> results(cases.size());
  std::vector<std::string> reasons(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const CaseRecord &c = cases[i];
    auto full_it = c.predictions.find(cfg.full_method);
    if (full_it == c.predictions.end()) {
      reasons[i] = "missing full-phase " + std::string(to_string(cfg.full_method)) + " prediction";
      return;
    }
    try {
      const TerritoryMask full = io::load_mask(m.resolve(full_it->second));
      CaseMetrics cm{c.case_id, c.patient_id, {}, {}, {}};
      for (Phase ph : cfg.phases) {
        auto it = c.phase_predictions.find(ph);
        if (it == c.phase_predictions.end()) {
          cm.notes.push_back("phase " + std::string(to_string(ph)) + " absent");
          continue;
        }
        const TerritoryMask pred = io::load_mask(m.resolve(it->second));
        if (pred.shape() != full.shape()) {
          cm.notes.push_back("phase " + std::string(to_string(ph)) + " prediction shape mismatch");
          continue;
        }
        cm.phases[ph] = metrics::overlap_report(pred, full);
      }
      results[i] = std::move(cm);
    } catch (const Error &e) {
      reasons[i] = e.what();
    }
  });
  std::vector<CaseMetrics> ok;
  std::vector<Exclusion> excluded;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (results[i])
      ok.push_back(std::move(*results[i]));
    else
      excluded.push_back({cases[i].case_id, reasons[i]});
  }
  return compute_phase_table(std::move(ok), cfg, std::move(excluded));
}

// ---- timing ------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

TimingTable run_timing(const CohortManifest &m, const ExperimentConfig &cfg,
                       const std::vector<reg::AtlasEntry> &library) {
  std::vector<CaseRecord> cases;
  for (const auto &c : select_cases(m, cfg))
    if (!c.reference.empty() && !c.minip.empty() && c.predictions.count(Method::Model))
      cases.push_back(c);
  if (static_cast<int>(cases.size()) < kTimingMinCases)
    throw Error("timing needs at least " + std::to_string(kTimingMinCases) +
                " cases with a MinIP, reference and MODEL prediction, got " +
                std::to_string(cases.size()));
  if (library.empty())
    throw Error("timing needs a non-empty atlas library");

  TimingTable t;
  const auto params = maskops::MorphologyParams::with_radius(cfg.cleanup_radius);
  constexpr double kMinMeasurable = 1e-3;
  constexpr int kMaxRepeats = 1 << 16;
  for (const auto &c : cases) {
    const TerritoryMask ref = io::load_mask(m.resolve(c.reference));
    const TerritoryMask pred = io::load_mask(m.resolve(c.predictions.at(Method::Model)));
    MinIpImage patient{io::read_png16(m.resolve(c.minip)), PhaseScope::Full, {}};

    TimingCase tc;
    tc.case_id = c.case_id;
    // (a) mask derivation + metrics; repeated until measurable.
    int reps = t.pipeline_repeats;
    double elapsed = 0.0;
    for (;;) {
      const auto t0 = Clock::now();
      for (int r = 0; r < reps; ++r) {
        const TerritoryMask post = maskops::postprocess_prediction(pred, params);
        const auto rep = metrics::overlap_report(post, ref);
        if (rep.ica.dsc < 0) // keeps the work observable
          throw Error("negative DSC");
      }
      elapsed = seconds_since(t0);
      if (elapsed >= kMinMeasurable || reps >= kMaxRepeats)
        break;
      reps *= 2;
    }
    t.pipeline_repeats = std::max(t.pipeline_repeats, reps);
    tc.pipeline_seconds = elapsed / reps;

    // (b) full atlas path.
    const auto t0 = Clock::now();
    const auto ar = reg::register_best_atlas(library, patient, c.view, cfg.registration);
    const auto rep = metrics::overlap_report(ar.warped_mask, ref);
    tc.atlas_seconds = seconds_since(t0);
    (void)rep;
    tc.atlas_id = ar.best.atlas_id;
    tc.similarity = ar.best.similarity;
    tc.failed = ar.best.failed;
    if (cfg.write_atlas_predictions) {
      const std::string rel = c.case_id + "/pred_atlas.png";
      io::save_mask(ar.warped_mask, m.resolve(rel));
      t.written_predictions[c.case_id] = rel;
    }
    t.cases.push_back(tc);
  }
  std::vector<double> a, b;
  for (const auto &c : t.cases) {
    a.push_back(c.pipeline_seconds);
    b.push_back(c.atlas_seconds);
  }
  t.pipeline = stats::mean_ci95(a);
  t.atlas = stats::mean_ci95(b);
  t.atlas_slower = t.atlas.center > t.pipeline.center;
  try {
    t.test = stats::wilcoxon_signed_rank(b, a);
  } catch (const Error &e) {
    t.error = e.what();
  }
  return t;
}

TimingTable run_timing(const CohortManifest &m, const ExperimentConfig &cfg) {
  if (cfg.atlas_library.empty())
    throw Error("config needs atlas_library for timing");
  return run_timing(m, cfg, reg::load_atlas_library(m.resolve(cfg.atlas_library)));
}

// ---- rendering -----------------------------------------------------------------

namespace {

int decimals_for(Metric m) { return higher_is_better(m) ? 3 : 1; }

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string fmt_p(double p) { return p < 0.001 ? "<0.001" : fmt(p, 3); }

json cell_json(const Cell &c) {
  json j{{"n", c.n}};
  if (c.summary) {
    j["center"] = c.summary->center;
    j["low"] = c.summary->low;
    j["high"] = c.summary->high;
  } else {
    j["center"] = nullptr;
  }
  return j;
}

json comparison_json(const Comparison &c) {
  json j{{"label", c.label},
         {"territory", to_string(c.territory)},
         {"metric", to_string(c.metric)}};
  if (c.result) {
    j["test"] = to_string(c.result->test);
    j["statistic"] = c.result->statistic;
    j["p_value"] = c.result->p_value;
    j["n"] = c.result->n;
    j["exact"] = c.result->exact;
    j["stars"] = c.stars();
  } else {
    j["error"] = c.error;
  }
  return j;
}

json exclusions_json(const std::vector<Exclusion> &ex) {
  json a = json::array();
  for (const auto &e : ex)
    a.push_back({{"case_id", e.case_id}, {"reason", e.reason}});
  return a;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w)
    s.append(w - s.size(), ' ');
  return s;
}

std::string render(const std::vector<std::vector<std::string>> &rows) {
  std::vector<std::size_t> w;
  for (const auto &r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (w.size() <= i)
        w.push_back(0);
      w[i] = std::max(w[i], r[i].size());
    }
  std::ostringstream os;
  for (const auto &r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i)
      line += i + 1 < r.size() ? pad(r[i], w[i] + 2) : r[i];
    while (!line.empty() && line.back() == ' ')
      line.pop_back();
    os << line << '\n';
  }
  return os.str();
}

std::string comparisons_text(const std::vector<Comparison> &cs) {
  if (cs.empty())
    return {};
  std::vector<std::vector<std::string>> rows{{"comparison", "territory", "metric", "test", "n", "p", ""}};
  for (const auto &c : cs) {
    if (c.result)
      rows.push_back({c.label, std::string(to_string(c.territory)), std::string(to_string(c.metric)),
                      std::string(to_string(c.result->test)), std::to_string(c.result->n),
                      fmt_p(c.result->p_value), c.stars()});
    else
      rows.push_back({c.label, std::string(to_string(c.territory)), std::string(to_string(c.metric)),
                      "-", "-", "-", c.error});
  }
  return render(rows);
}

std::string exclusions_text(const std::vector<Exclusion> &ex) {
  std::string s = "excluded: " + std::to_string(ex.size()) + "\n";
  for (const auto &e : ex)
    s += "  " + e.case_id + ": " + e.reason + "\n";
  return s;
}

void write_text(const std::filesystem::path &p, const std::string &s) {
  std::ofstream out(p);
  if (!out)
    throw io::IoError("cannot write " + p.string());
  out << s;
}

} // namespace

std::string format_cell(const Cell &c, int decimals) {
  if (!c.summary)
    return "n/a";
  return fmt(c.summary->center, decimals) + " [" + fmt(c.summary->low, decimals) + "-" +
         fmt(c.summary->high, decimals) + "]";
}

json to_json(const Table1 &t) {
  json rows = json::array();
  for (const auto &r : t.rows) {
    json cells = json::object();
    for (const auto &[m, c] : r.cells)
      cells[std::string(to_string(m))] = cell_json(c);
    rows.push_back({{"territory", to_string(r.territory)},
                    {"method", to_string(r.method)},
                    {"cells", cells}});
  }
  json comps = json::array();
  for (const auto &c : t.comparisons)
    comps.push_back(comparison_json(c));
  return {{"schema_version", kSchemaVersion},
          {"kind", "table1"},
          {"summary", to_string(t.summary)},
          {"cases", t.cases.size()},
          {"rows", rows},
          {"comparisons", comps},
          {"excluded", exclusions_json(t.excluded)}};
}

json to_json(const PhaseTable &t) {
  json rows = json::array();
  for (const auto &r : t.rows) {
    json cells = json::object();
    for (const auto &[m, c] : r.cells)
      cells[std::string(to_string(m))] = cell_json(c);
    rows.push_back({{"phase", to_string(r.phase)},
                    {"territory", to_string(r.territory)},
                    {"cells", cells}});
  }
  json comps = json::array();
  for (const auto &c : t.comparisons)
    comps.push_back(comparison_json(c));
  return {{"schema_version", kSchemaVersion},
          {"kind", "phases"},
          {"summary", to_string(t.summary)},
          {"cases", t.cases.size()},
          {"rows", rows},
          {"comparisons", comps},
          {"notes", t.notes},
          {"excluded", exclusions_json(t.excluded)}};
}

json to_json(const TimingTable &t) {
  json cases = json::array();
  for (const auto &c : t.cases)
    cases.push_back({{"case_id", c.case_id},
                     {"pipeline_seconds", c.pipeline_seconds},
                     {"atlas_seconds", c.atlas_seconds},
                     {"atlas_id", c.atlas_id},
                     {"similarity", c.similarity},
                     {"failed", c.failed}});
  auto summary = [](const stats::SummaryStat &s) {
    return json{{"mean", s.center}, {"ci_low", s.low}, {"ci_high", s.high}};
  };
  json j{{"schema_version", kSchemaVersion},
         {"kind", "timing"},
         {"n", t.cases.size()},
         {"pipeline", summary(t.pipeline)},
         {"atlas", summary(t.atlas)},
         {"pipeline_repeats", t.pipeline_repeats},
         {"atlas_slower", t.atlas_slower},
         {"cases", cases}};
  if (t.test)
    j["test"] = {{"test", to_string(t.test->test)},
                 {"statistic", t.test->statistic},
                 {"p_value", t.test->p_value},
                 {"n", t.test->n}};
  else if (!t.error.empty())
    j["test_error"] = t.error;
  return j;
}

std::string to_text(const Table1 &t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"territory", "method", "n"};
  for (Metric m : t.metrics)
    head.emplace_back(to_string(m));
  rows.push_back(head);
  for (const auto &r : t.rows) {
    int n = 0;
    for (const auto &[m, c] : r.cells)
      n = std::max(n, c.n);
    std::vector<std::string> line{std::string(to_string(r.territory)),
                                  std::string(to_string(r.method)), std::to_string(n)};
    for (Metric m : t.metrics)
      line.push_back(format_cell(r.cells.at(m), decimals_for(m)));
    rows.push_back(line);
  }
  std::string s = "summary: " + std::string(to_string(t.summary)) + ", cases: " +
                  std::to_string(t.cases.size()) + "\n\n" + render(rows);
  const std::string comps = comparisons_text(t.comparisons);
  if (!comps.empty())
    s += "\n" + comps;
  return s + "\n" + exclusions_text(t.excluded);
}

std::string to_text(const PhaseTable &t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"territory", "phase", "n"};
  for (Metric m : t.metrics)
    head.emplace_back(to_string(m));
  rows.push_back(head);
  for (const auto &r : t.rows) {
    int n = 0;
    for (const auto &[m, c] : r.cells)
      n = std::max(n, c.n);
    std::vector<std::string> line{std::string(to_string(r.territory)),
                                  std::string(to_string(r.phase)), std::to_string(n)};
    for (Metric m : t.metrics)
      line.push_back(format_cell(r.cells.at(m), decimals_for(m)));
    rows.push_back(line);
  }
  std::string s = "summary: " + std::string(to_string(t.summary)) +
                  ", reference: full-phase prediction, cases: " +
                  std::to_string(t.cases.size()) + "\n\n" + render(rows);
  const std::string comps = comparisons_text(t.comparisons);
  if (!comps.empty())
    s += "\n" + comps;
  for (const auto &n : t.notes)
    s += "note: " + n + "\n";
  return s + "\n" + exclusions_text(t.excluded);
}

std::string to_text(const TimingTable &t) {
  auto line = [](const std::string &name, const stats::SummaryStat &s) {
    return std::vector<std::string>{name, fmt(s.center, 4) + " s [95% CI " + fmt(s.low, 4) + "-" +
                                              fmt(s.high, 4) + "]"};
  };
  std::string s = "cases: " + std::to_string(t.cases.size()) +
                  ", pipeline repeats: " + std::to_string(t.pipeline_repeats) + "\n\n";
  s += render({{"path", "mean wall-clock"},
               line("mask derivation + metrics", t.pipeline),
               line("atlas registration + metrics", t.atlas)});
  s += std::string("\natlas path slower: ") + (t.atlas_slower ? "yes" : "no") + "\n";
  if (t.test)
    s += "WILCOXON p = " + fmt_p(t.test->p_value) + " " +
         std::string(stats::significance_stars(t.test->p_value)) + "\n";
  else if (!t.error.empty())
    s += "test: " + t.error + "\n";
  return s;
}

void write_outputs(const Table1 &t, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "table1.json", to_json(t).dump(2) + "\n");
  write_text(dir / "table1.txt", to_text(t));
  save_case_metrics(t.cases, dir);
}

void write_outputs(const PhaseTable &t, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "phases.json", to_json(t).dump(2) + "\n");
  write_text(dir / "phases.txt", to_text(t));
  save_case_metrics(t.cases, dir);
}

void write_outputs(const TimingTable &t, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "timing.json", to_json(t).dump(2) + "\n");
  write_text(dir / "timing.txt", to_text(t));
}

} // namespace vterr::report

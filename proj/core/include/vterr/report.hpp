#pragma once
// Cohort-level experiments: patient-level splits, method comparison tables,
// phase-dependency tables and runtime comparisons.
//
// Every table is an aggregation of per-case records that are persisted next
// to it, so each cell can be recomputed from the per-case JSON alone.
// Aggregation sorts cases by id and is single-threaded.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vterr/manifest.hpp"
#include "vterr/metrics.hpp"
#include "vterr/registration.hpp"
#include "vterr/stats.hpp"

namespace vterr::report {

// ---- splits ----------------------------------------------------------------

struct SplitFractions {
  double train = 0.72;
  double val = 0.18;
  double test = 0.10;
};

struct SplitOutcome {
  CohortManifest manifest;
  std::vector<std::string> warnings;
};

/// Patient-level split stratified by occlusion location. Split sizes follow
/// the fractions exactly (largest remainder); inside a split each stratum
/// gets floor or ceil of its quota. Strata with fewer patients than there are
/// non-empty splits are pooled, with a warning.
SplitOutcome split_cohort(const CohortManifest &m, const SplitFractions &f,
                          std::uint64_t seed);

// ---- configuration -----------------------------------------------------------

enum class Metric { DSC, JI, ASD, HD };
inline constexpr Metric kAllMetrics[] = {Metric::DSC, Metric::JI, Metric::ASD, Metric::HD};
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);
/// Value of one metric for one territory row; empty when the row is absent
/// or the distance is undefined.
std::optional<double> metric_value(const metrics::TerritoryMetrics &t, Metric m);
/// True for metrics where larger is better.
bool higher_is_better(Metric m);

struct ExperimentConfig {
  std::vector<Method> methods{Method::Model, Method::Atlas};
  std::vector<Metric> metrics{kAllMetrics, kAllMetrics + 4};
  stats::SummaryKind summary = stats::SummaryKind::MedianIqr;
  /// Paired test per metric; metrics not listed use `default_test`.
  std::map<Metric, stats::TestKind> tests;
  stats::TestKind default_test = stats::TestKind::Wilcoxon;
  std::vector<Phase> phases{Phase::Arterial, Phase::Capillary, Phase::Venous,
                            Phase::NonContrast};
  /// Phase every other phase row is tested against.
  Phase phase_reference = Phase::Capillary;
  /// Method whose prediction on the full-phase MinIP anchors the phase table.
  Method full_method = Method::Model;
  /// Restrict to one split (requires a split manifest).
  std::optional<Split> split;
  std::string atlas_library;
  int cleanup_radius = 3;
  reg::RegistrationOptions registration;
  /// Write the atlas-path masks as ATLAS predictions while timing.
  bool write_atlas_predictions = false;

  [[nodiscard]] stats::TestKind test_for(Metric m) const;
  /// Throws when a configured method is absent from every case, or a test is
  /// not a paired test.
  void validate(const CohortManifest &m) const;
};

ExperimentConfig parse_config(const nlohmann::json &j);
ExperimentConfig load_config(const std::filesystem::path &path);

// ---- per-case records --------------------------------------------------------

struct CaseMetrics {
  std::string case_id;
  std::string patient_id;
  std::map<Method, metrics::OverlapReport> methods;
  std::map<Phase, metrics::OverlapReport> phases;
  std::vector<std::string> notes;
};

/// {"ICA": {...}, "MCA": {...}} with null distances when undefined.
nlohmann::json to_json(const metrics::OverlapReport &r);
nlohmann::json to_json(const CaseMetrics &c);
CaseMetrics case_metrics_from_json(const nlohmann::json &j);
/// Writes cases/<case_id>.json under `dir`.
void save_case_metrics(const std::vector<CaseMetrics> &cases,
                       const std::filesystem::path &dir);
std::vector<CaseMetrics> load_case_metrics(const std::filesystem::path &dir);

// ---- tables ------------------------------------------------------------------

struct Cell {
  std::optional<stats::SummaryStat> summary;
  int n = 0;
};

struct Comparison {
  std::string label; // e.g. "MODEL vs ATLAS" or "ARTERIAL vs CAPILLARY"
  Territory territory = Territory::ICA;
  Metric metric = Metric::DSC;
  std::optional<stats::TestResult> result;
  std::string error;
  [[nodiscard]] std::string stars() const;
};

struct Exclusion {
  std::string case_id;
  std::string reason;
};

struct Table1 {
  struct Row {
    Territory territory;
    Method method;
    std::map<Metric, Cell> cells;
  };
  std::vector<Row> rows;
  std::vector<Comparison> comparisons;
  std::vector<Exclusion> excluded;
  std::vector<CaseMetrics> cases;
  stats::SummaryKind summary = stats::SummaryKind::MedianIqr;
  std::vector<Metric> metrics;
};

struct PhaseTable {
  struct Row {
    Phase phase;
    Territory territory;
    std::map<Metric, Cell> cells;
  };
  std::vector<Row> rows;
  std::vector<Comparison> comparisons;
  std::vector<Exclusion> excluded;
  std::vector<std::string> notes;
  std::vector<CaseMetrics> cases;
  stats::SummaryKind summary = stats::SummaryKind::MedianIqr;
  std::vector<Metric> metrics;
};

/// Pure aggregation over per-case records (methods).
Table1 compute_table1(std::vector<CaseMetrics> cases, const ExperimentConfig &cfg,
                      std::vector<Exclusion> excluded = {});
/// Pure aggregation over per-case records (phases).
PhaseTable compute_phase_table(std::vector<CaseMetrics> cases,
                               const ExperimentConfig &cfg,
                               std::vector<Exclusion> excluded = {});

/// Loads masks, scores every configured method against the reference, then
/// aggregates. Cases missing a prediction or reference are excluded and
/// listed.
Table1 run_table1(const CohortManifest &m, const ExperimentConfig &cfg);
/// Scores every per-phase prediction against the prediction of
/// cfg.full_method on the full-phase MinIP.
PhaseTable run_phase_analysis(const CohortManifest &m, const ExperimentConfig &cfg);

struct TimingCase {
  std::string case_id;
  double pipeline_seconds = 0.0;
  double atlas_seconds = 0.0;
  std::string atlas_id;
  double similarity = 0.0;
  bool failed = false;
};

struct TimingTable {
  std::vector<TimingCase> cases;
  stats::SummaryStat pipeline;
  stats::SummaryStat atlas;
  /// Repetitions of the pipeline path per case (raised for sub-millisecond
  /// paths).
  int pipeline_repeats = 1;
  bool atlas_slower = false;
  std::optional<stats::TestResult> test;
  std::string error;
  /// case_id -> manifest-relative path of the atlas mask, when written.
  std::map<std::string, std::string> written_predictions;
};

inline constexpr int kTimingMinCases = 5;

/// Times (a) post-processing of the MODEL prediction plus metrics and (b) the
/// full atlas path (best-atlas registration over the library plus metrics).
/// Throws when fewer than five cases are available.
TimingTable run_timing(const CohortManifest &m, const ExperimentConfig &cfg,
                       const std::vector<reg::AtlasEntry> &library);
TimingTable run_timing(const CohortManifest &m, const ExperimentConfig &cfg);

// ---- rendering -------------------------------------------------------------

nlohmann::json to_json(const Table1 &t);
nlohmann::json to_json(const PhaseTable &t);
nlohmann::json to_json(const TimingTable &t);
std::string to_text(const Table1 &t);
std::string to_text(const PhaseTable &t);
std::string to_text(const TimingTable &t);

/// Writes <name>.json, <name>.txt and the per-case records into `dir`.
void write_outputs(const Table1 &t, const std::filesystem::path &dir);
void write_outputs(const PhaseTable &t, const std::filesystem::path &dir);
void write_outputs(const TimingTable &t, const std::filesystem::path &dir);

/// "0.96 [0.94-0.97]" style cell text with the given decimals.
std::string format_cell(const Cell &c, int decimals);

} // namespace vterr::report

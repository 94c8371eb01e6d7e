#pragma once
// Two-rater Likert assessment of territory overlays: session enumeration,
// per-rater presentation orders, an append-only event log, consensus by
// agreement or adjudication, and success-rate comparisons between methods.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vterr/io.hpp"
#include "vterr/manifest.hpp"
#include "vterr/stats.hpp"

namespace vterr::rating {

class RatingError : public Error {
public:
  using Error::Error;
};
/// Unknown session, item or rater.
class NotFound : public RatingError {
public:
  using RatingError::RatingError;
};
/// Request is well-formed but not allowed in the current state.
class Conflict : public RatingError {
public:
  using RatingError::RatingError;
};

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 3;
inline constexpr int kSuccessScore = 2;

/// Rubric shown to raters, index = score.
const std::vector<std::string> &rubric();

struct RatingItem {
  std::string item_id;
  std::string case_id;
  std::string patient_id;
  View view = View::AP;
  Stage stage = Stage::PostEvt;
  Occlusion occlusion = Occlusion::M1;
  Method method = Method::Model;
  std::string minip;   // absolute path
  std::string overlay; // absolute path
};

struct LikertRating {
  std::string item_id;
  std::string rater_id;
  int score = 0;
  std::string timestamp;
  int revision = 0;
};

enum class Resolution { Agreement, Consensus };
std::string_view to_string(Resolution r);

struct ConsensusRecord {
  std::string item_id;
  int final_score = 0;
  Resolution resolved_by = Resolution::Agreement;
};

struct SessionConfig {
  std::vector<std::string> raters;
  std::string adjudicator = "adjudicator";
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Model, Method::Atlas};
  /// Hides method identity and case metadata from rater payloads.
  bool blinded = true;
};

struct Rate {
  int successes = 0;
  int total = 0;
  [[nodiscard]] double value() const { return total ? double(successes) / total : 0.0; }
};

struct MethodResults {
  Method method = Method::Model;
  Rate acquisitions;
  /// Key "STAGE/VIEW/OCCLUSION".
  std::map<std::string, Rate> strata;
  Rate patients;
  /// Likert histogram of final scores, index = score.
  std::array<int, 4> distribution{0, 0, 0, 0};
};

struct SuccessReport {
  std::vector<MethodResults> methods;
  /// Paired per-patient comparison between the first two methods.
  int b = 0; // first succeeds, second fails
  int c = 0; // first fails, second succeeds
  int paired_patients = 0;
  std::optional<stats::TestResult> mcnemar;
  std::string mcnemar_error;
  std::map<std::string, std::map<Method, bool>> per_patient;
};

/// One assessment session. Thread-safe; submissions are serialized through
/// one writer and appended to the event log before they become visible.
class Session {
public:
  /// Enumerates one item per (case, method), sorted by case id then method.
  /// Throws RatingError when a case lacks a mask for a listed method.
  static std::unique_ptr<Session> create(std::string id, const report::CohortManifest &m,
                                         const SessionConfig &cfg,
                                         std::optional<std::filesystem::path> log = {});
  /// Rebuilds a session by replaying its event log.
  static std::unique_ptr<Session> replay(const std::filesystem::path &log);

  [[nodiscard]] const std::string &id() const { return id_; }
  [[nodiscard]] const SessionConfig &config() const { return cfg_; }
  [[nodiscard]] const std::vector<RatingItem> &items() const { return items_; }
  [[nodiscard]] const RatingItem &item(const std::string &item_id) const;
  [[nodiscard]] bool has_item(const std::string &item_id) const;

  /// Presentation order for an enrolled rater (seeded permutation).
  [[nodiscard]] std::vector<std::string> order_for(const std::string &rater) const;

  /// Returns the stored rating (revision counts from 0).
  LikertRating submit_rating(const std::string &item_id, const std::string &rater,
                             int score, std::string timestamp = {});
  ConsensusRecord submit_consensus(const std::string &item_id,
                                   const std::string &adjudicator, int score,
                                   std::string timestamp = {});

  [[nodiscard]] std::optional<LikertRating> latest(const std::string &item_id,
                                                   const std::string &rater) const;
  /// Every rating event for an item, oldest first.
  [[nodiscard]] std::vector<LikertRating> audit(const std::string &item_id) const;

  /// Items rated by both raters with different scores and no standing
  /// adjudication.
  [[nodiscard]] std::vector<std::string> pending_consensus() const;
  [[nodiscard]] std::optional<ConsensusRecord> final_record(const std::string &item_id) const;
  [[nodiscard]] std::vector<std::string> unfinalized() const;

  /// Throws Conflict listing unfinalized items.
  [[nodiscard]] SuccessReport success_rates() const;

  /// Rater-facing list; contains no method identity when blinded.
  [[nodiscard]] nlohmann::json rater_payload(const std::string &rater) const;

private:
  Session() = default;
  void append(const nlohmann::json &event);
  void apply(const nlohmann::json &event);
  [[nodiscard]] bool enrolled(const std::string &rater) const;
  [[nodiscard]] std::optional<ConsensusRecord> final_locked(const std::string &item_id) const;

  std::string id_;
  SessionConfig cfg_;
  std::vector<RatingItem> items_;
  std::map<std::string, std::size_t> index_;
  std::optional<std::filesystem::path> log_;

  mutable std::shared_mutex mu_;
  long long seq_ = 0;
  std::vector<LikertRating> history_;
  // (item, rater) -> latest rating and the event sequence that set it.
  std::map<std::pair<std::string, std::string>, std::pair<LikertRating, long long>> latest_;
  // item -> adjudicated score and its event sequence.
  std::map<std::string, std::pair<int, long long>> adjudicated_;
};

/// MinIP rendered to 8-bit gray with translucent label fill and outlines.
Grid<io::Rgb> overlay_composite(const Image16 &minip, const TerritoryMask &mask);

nlohmann::json to_json(const SuccessReport &r);

std::string now_iso8601();

} // namespace vterr::rating

#pragma once
// Cohort manifest: case records, per-patient splits, JSON persistence.
//
// Paths inside a manifest are relative to the manifest's directory.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vterr/types.hpp"

namespace vterr::report {

inline constexpr int kSchemaVersion = 1;

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct CohortManifest {
  std::vector<CaseRecord> cases;
  /// patient_id -> split; empty until split_cohort has run.
  std::map<std::string, Split> splits;
  /// Directory the relative paths resolve against.
  std::filesystem::path base_dir;

  [[nodiscard]] std::filesystem::path resolve(const std::string &rel) const;
  [[nodiscard]] std::vector<std::string> patients() const;
  [[nodiscard]] const CaseRecord &find(const std::string &case_id) const;
  /// Cases whose patient is assigned to `s`.
  [[nodiscard]] std::vector<CaseRecord> cases_in(Split s) const;
  /// Throws on duplicate case ids or a patient whose acquisitions disagree on
  /// occlusion.
  void validate() const;
};

CohortManifest load_manifest(const std::filesystem::path &path);
void save_manifest(const CohortManifest &m, const std::filesystem::path &path);

} // namespace vterr::report

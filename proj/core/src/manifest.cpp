#include "vterr/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vterr/io.hpp"

namespace vterr::report {

using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
  case Split::Train: return "TRAIN";
  case Split::Val: return "VAL";
  case Split::Test: return "TEST";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "TRAIN") return Split::Train;
  if (u == "VAL" || u == "VALIDATION") return Split::Val;
  if (u == "TEST") return Split::Test;
  throw Error("unknown split: " + std::string(s));
}

std::filesystem::path CohortManifest::resolve(const std::string &rel) const {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> CohortManifest::patients() const {
  std::set<std::string> s;
  for (const auto &c : cases)
    s.insert(c.patient_id);
  return {s.begin(), s.end()};
}

const CaseRecord &CohortManifest::find(const std::string &case_id) const {
  for (const auto &c : cases)
    if (c.case_id == case_id)
      return c;
  throw Error("unknown case: " + case_id);
}

std::vector<CaseRecord> CohortManifest::cases_in(Split s) const {
  std::vector<CaseRecord> out;
  for (const auto &c : cases) {
    auto it = splits.find(c.patient_id);
    if (it != splits.end() && it->second == s)
      out.push_back(c);
  }
  return out;
}

void CohortManifest::validate() const {
  std::set<std::string> ids;
  std::map<std::string, Occlusion> occ;
  for (const auto &c : cases) {
    if (c.case_id.empty() || c.patient_id.empty())
      throw Error("case record needs case_id and patient_id");
    if (!ids.insert(c.case_id).second)
      throw Error("duplicate case id: " + c.case_id);
    auto [it, fresh] = occ.emplace(c.patient_id, c.occlusion);
    if (!fresh && it->second != c.occlusion)
      throw Error("patient " + c.patient_id + " has conflicting occlusion labels");
  }
}

namespace {

json record_to_json(const CaseRecord &c) {
  json j{{"case_id", c.case_id},
         {"patient_id", c.patient_id},
         {"view", to_string(c.view)},
         {"stage", to_string(c.stage)},
         {"occlusion", to_string(c.occlusion)}};
  if (!c.sequence_dir.empty()) j["sequence_dir"] = c.sequence_dir;
  if (!c.minip.empty()) j["minip"] = c.minip;
  if (!c.reference.empty()) j["reference"] = c.reference;
  json preds = json::object();
  for (const auto &[m, p] : c.predictions)
    preds[std::string(to_string(m))] = p;
  j["predictions"] = preds;
  if (!c.phase_minips.empty()) {
    json pm = json::object();
    for (const auto &[ph, p] : c.phase_minips)
      pm[std::string(to_string(ph))] = p;
    j["phase_minips"] = pm;
  }
  if (!c.phase_predictions.empty()) {
    json pp = json::object();
    for (const auto &[ph, p] : c.phase_predictions)
      pp[std::string(to_string(ph))] = p;
    j["phase_predictions"] = pp;
  }
  return j;
}

CaseRecord record_from_json(const json &j) {
  CaseRecord c;
  c.case_id = j.at("case_id").get<std::string>();
  c.patient_id = j.at("patient_id").get<std::string>();
  c.view = parse_view(j.at("view").get<std::string>());
  c.stage = parse_stage(j.at("stage").get<std::string>());
  c.occlusion = parse_occlusion(j.at("occlusion").get<std::string>());
  c.sequence_dir = j.value("sequence_dir", "");
  c.minip = j.value("minip", "");
  c.reference = j.value("reference", "");
  if (j.contains("predictions"))
    for (const auto &[k, v] : j.at("predictions").items())
      c.predictions[parse_method(k)] = v.get<std::string>();
  if (j.contains("phase_minips"))
    for (const auto &[k, v] : j.at("phase_minips").items())
      c.phase_minips[parse_phase(k)] = v.get<std::string>();
  if (j.contains("phase_predictions"))
    for (const auto &[k, v] : j.at("phase_predictions").items())
      c.phase_predictions[parse_phase(k)] = v.get<std::string>();
  return c;
}

} // namespace

CohortManifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw io::IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw io::IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  CohortManifest m;
  m.base_dir = path.parent_path();
  try {
    for (const auto &c : j.at("cases"))
      m.cases.push_back(record_from_json(c));
    if (j.contains("splits"))
      for (const auto &[k, v] : j.at("splits").items())
        m.splits[k] = parse_split(v.get<std::string>());
  } catch (const json::exception &e) {
    throw io::IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const CohortManifest &m, const std::filesystem::path &path) {
  json j{{"schema_version", kSchemaVersion}};
  json cases = json::array();
  for (const auto &c : m.cases)
    cases.push_back(record_to_json(c));
  j["cases"] = cases;
  if (!m.splits.empty()) {
    json s = json::object();
    for (const auto &[p, sp] : m.splits)
      s[p] = to_string(sp);
    j["splits"] = s;
  }
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw io::IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

} // namespace vterr::report

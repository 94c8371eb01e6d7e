#include "vterr/rating.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace vterr::rating {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_score(int score) {
  if (score < kMinScore || score > kMaxScore)
    throw RatingError("score " + std::to_string(score) + " outside " +
                      std::to_string(kMinScore) + "-" + std::to_string(kMaxScore));
}

json item_json(const RatingItem &it) {
  return {{"item_id", it.item_id},     {"case_id", it.case_id},
          {"patient_id", it.patient_id}, {"view", to_string(it.view)},
          {"stage", to_string(it.stage)}, {"occlusion", to_string(it.occlusion)},
          {"method", to_string(it.method)}, {"minip", it.minip},
          {"overlay", it.overlay}};
}

RatingItem item_from(const json &j) {
  RatingItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.case_id = j.at("case_id").get<std::string>();
  it.patient_id = j.at("patient_id").get<std::string>();
  it.view = parse_view(j.at("view").get<std::string>());
  it.stage = parse_stage(j.at("stage").get<std::string>());
  it.occlusion = parse_occlusion(j.at("occlusion").get<std::string>());
  it.method = parse_method(j.at("method").get<std::string>());
  it.minip = j.at("minip").get<std::string>();
  it.overlay = j.at("overlay").get<std::string>();
  return it;
}

} // namespace

const std::vector<std::string> &rubric() {
  static const std::vector<std::string> r{
      "0 - failure: the outline cannot be used as a territory",
      "1 - poor: large parts of the territory are missed or overshot",
      "2 - acceptable: small deviations from the expected boundaries",
      "3 - perfect: the outline follows the expected territory"};
  return r;
}

std::string_view to_string(Resolution r) {
  return r == Resolution::Agreement ? "AGREEMENT" : "CONSENSUS";
}

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::unique_ptr<Session> Session::create(std::string id, const report::CohortManifest &m,
                                         const SessionConfig &cfg,
                                         std::optional<std::filesystem::path> log) {
  if (cfg.raters.size() != 2)
    throw RatingError("a session needs exactly two raters");
  if (cfg.raters[0] == cfg.raters[1])
    throw RatingError("rater ids must differ");
  if (cfg.adjudicator.empty() ||
      std::find(cfg.raters.begin(), cfg.raters.end(), cfg.adjudicator) != cfg.raters.end())
    throw RatingError("the adjudicator must be distinct from both raters");
  if (cfg.methods.empty())
    throw RatingError("a session needs at least one method");
  if (m.cases.empty())
    throw RatingError("manifest has no cases");

  std::unique_ptr<Session> s(new Session());
  s->id_ = std::move(id);
  s->cfg_ = cfg;
  std::vector<Method> methods = cfg.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  auto cases = m.cases;
  std::sort(cases.begin(), cases.end(),
            [](const CaseRecord &a, const CaseRecord &b) { return a.case_id < b.case_id; });
  for (const auto &c : cases) {
    if (c.minip.empty())
      throw RatingError("case " + c.case_id + " has no MinIP");
    for (Method me : methods) {
      auto it = c.predictions.find(me);
      if (it == c.predictions.end())
        throw RatingError("missing mask: case " + c.case_id + " method " +
                          std::string(to_string(me)));
      char hex[24];
      std::snprintf(hex, sizeof hex, "%012llx",
                    static_cast<unsigned long long>(
                        mix(cfg.seed, fnv1a(c.case_id + "/" + std::string(to_string(me)))) &
                        0xffffffffffffULL));
      RatingItem item{s->id_ + "-" + hex, c.case_id, c.patient_id, c.view, c.stage,
                      c.occlusion, me, m.resolve(c.minip).string(),
                      m.resolve(it->second).string()};
      if (!s->index_.emplace(item.item_id, s->items_.size()).second)
        throw RatingError("item id collision; choose another seed");
      s->items_.push_back(std::move(item));
    }
  }
  if (log) {
    if (std::filesystem::exists(*log))
      throw RatingError("session log already exists: " + log->string());
    if (log->has_parent_path())
      std::filesystem::create_directories(log->parent_path());
    s->log_ = log;
    json items = json::array();
    for (const auto &it : s->items_)
      items.push_back(item_json(it));
    json methods_j = json::array();
    for (Method me : cfg.methods)
      methods_j.push_back(to_string(me));
    s->append({{"type", "session"},
               {"schema_version", report::kSchemaVersion},
               {"session_id", s->id_},
               {"config",
                {{"raters", cfg.raters},
                 {"adjudicator", cfg.adjudicator},
                 {"seed", cfg.seed},
                 {"methods", methods_j},
                 {"blinded", cfg.blinded}}},
               {"items", items}});
  }
  return s;
}

std::unique_ptr<Session> Session::replay(const std::filesystem::path &log) {
  std::ifstream in(log, std::ios::binary);
  if (!in)
    throw NotFound("cannot open session log " + log.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::unique_ptr<Session> s;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    ++lineno;
    if (last) {
      // Torn tail from an interrupted write: cut it so later appends start clean.
      std::filesystem::resize_file(log, pos);
      break;
    }
    pos = nl + 1;
    if (line.empty())
      continue;
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::exception &) {
      throw RatingError(log.string() + ":" + std::to_string(lineno) + ": malformed event");
    }
    if (!s) {
      if (ev.value("type", "") != "session")
        throw RatingError(log.string() + ": first event must be the session header");
      s.reset(new Session());
      s->id_ = ev.at("session_id").get<std::string>();
      const auto &c = ev.at("config");
      s->cfg_.raters = c.at("raters").get<std::vector<std::string>>();
      s->cfg_.adjudicator = c.at("adjudicator").get<std::string>();
      s->cfg_.seed = c.at("seed").get<std::uint64_t>();
      s->cfg_.blinded = c.at("blinded").get<bool>();
      s->cfg_.methods.clear();
      for (const auto &m : c.at("methods"))
        s->cfg_.methods.push_back(parse_method(m.get<std::string>()));
      for (const auto &it : ev.at("items")) {
        s->index_.emplace(it.at("item_id").get<std::string>(), s->items_.size());
        s->items_.push_back(item_from(it));
      }
      continue;
    }
    s->apply(ev);
  }
  if (!s)
    throw RatingError(log.string() + ": empty session log");
  s->log_ = log;
  return s;
}

void Session::append(const json &event) {
  if (!log_)
    return;
  std::ofstream out(*log_, std::ios::app);
  if (!out)
    throw io::IoError("cannot append to " + log_->string());
  out << event.dump() << '\n';
  out.flush();
  if (!out)
    throw io::IoError("write failed on " + log_->string());
}

void Session::apply(const json &ev) {
  const std::string type = ev.at("type").get<std::string>();
  const long long seq = ev.at("seq").get<long long>();
  seq_ = std::max(seq_, seq);
  const std::string item = ev.at("item_id").get<std::string>();
  if (type == "rating") {
    LikertRating r{item, ev.at("rater_id").get<std::string>(), ev.at("score").get<int>(),
                   ev.value("timestamp", ""), ev.value("revision", 0)};
    history_.push_back(r);
    latest_[{r.item_id, r.rater_id}] = {r, seq};
  } else if (type == "consensus") {
    adjudicated_[item] = {ev.at("score").get<int>(), seq};
  } else {
    throw RatingError("unknown event type " + type);
  }
}

bool Session::enrolled(const std::string &rater) const {
  return std::find(cfg_.raters.begin(), cfg_.raters.end(), rater) != cfg_.raters.end();
}

bool Session::has_item(const std::string &item_id) const { return index_.count(item_id) > 0; }

const RatingItem &Session::item(const std::string &item_id) const {
  auto it = index_.find(item_id);
  if (it == index_.end())
    throw NotFound("unknown item " + item_id);
  return items_[it->second];
}

std::vector<std::string> Session::order_for(const std::string &rater) const {
  if (!enrolled(rater))
    throw NotFound("rater " + rater + " is not enrolled in session " + id_);
  std::vector<std::string> ids;
  for (const auto &it : items_)
    ids.push_back(it.item_id);
  std::mt19937_64 g(mix(cfg_.seed, fnv1a(rater)));
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[static_cast<std::size_t>(g() % i)]);
  return ids;
}

LikertRating Session::submit_rating(const std::string &item_id, const std::string &rater,
                                    int score, std::string timestamp) {
  check_score(score);
  (void)item(item_id);
  if (!enrolled(rater))
    throw NotFound("rater " + rater + " is not enrolled in session " + id_);
  if (timestamp.empty())
    timestamp = now_iso8601();
  std::unique_lock lock(mu_);
  int revision = 0;
  if (auto it = latest_.find({item_id, rater}); it != latest_.end())
    revision = it->second.first.revision + 1;
  const json ev{{"type", "rating"}, {"seq", seq_ + 1},  {"item_id", item_id},
                {"rater_id", rater}, {"score", score},   {"timestamp", timestamp},
                {"revision", revision}};
  append(ev);
  apply(ev);
  return latest_.at({item_id, rater}).first;
}

std::optional<ConsensusRecord> Session::final_locked(const std::string &item_id) const {
  auto a = latest_.find({item_id, cfg_.raters[0]});
  auto b = latest_.find({item_id, cfg_.raters[1]});
  if (a == latest_.end() || b == latest_.end())
    return std::nullopt;
  const int sa = a->second.first.score, sb = b->second.first.score;
  if (sa == sb)
    return ConsensusRecord{item_id, sa, Resolution::Agreement};
  auto adj = adjudicated_.find(item_id);
  // An adjudication stands only if no rating changed after it.
  if (adj != adjudicated_.end() && adj->second.second > a->second.second &&
      adj->second.second > b->second.second)
    return ConsensusRecord{item_id, adj->second.first, Resolution::Consensus};
  return std::nullopt;
}

ConsensusRecord Session::submit_consensus(const std::string &item_id,
                                          const std::string &adjudicator, int score,
                                          std::string timestamp) {
  check_score(score);
  (void)item(item_id);
  if (adjudicator != cfg_.adjudicator)
    throw Conflict(adjudicator + " is not the adjudicator of session " + id_);
  if (timestamp.empty())
    timestamp = now_iso8601();
  std::unique_lock lock(mu_);
  auto a = latest_.find({item_id, cfg_.raters[0]});
  auto b = latest_.find({item_id, cfg_.raters[1]});
  if (a == latest_.end() || b == latest_.end())
    throw Conflict("item " + item_id + " has not been rated by both raters");
  if (a->second.first.score == b->second.first.score)
    throw Conflict("item " + item_id + " is already finalized by agreement");
  const json ev{{"type", "consensus"}, {"seq", seq_ + 1},      {"item_id", item_id},
                {"adjudicator", adjudicator}, {"score", score}, {"timestamp", timestamp}};
  append(ev);
  apply(ev);
  return *final_locked(item_id);
}

std::optional<LikertRating> Session::latest(const std::string &item_id,
                                            const std::string &rater) const {
  std::shared_lock lock(mu_);
  auto it = latest_.find({item_id, rater});
  if (it == latest_.end())
    return std::nullopt;
  return it->second.first;
}

std::vector<LikertRating> Session::audit(const std::string &item_id) const {
  std::shared_lock lock(mu_);
  std::vector<LikertRating> out;
  for (const auto &r : history_)
    if (r.item_id == item_id)
      out.push_back(r);
  return out;
}

std::vector<std::string> Session::pending_consensus() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto &it : items_) {
    auto a = latest_.find({it.item_id, cfg_.raters[0]});
    auto b = latest_.find({it.item_id, cfg_.raters[1]});
    if (a == latest_.end() || b == latest_.end())
      continue;
    if (!final_locked(it.item_id))
      out.push_back(it.item_id);
  }
  return out;
}

std::optional<ConsensusRecord> Session::final_record(const std::string &item_id) const {
  std::shared_lock lock(mu_);
  return final_locked(item_id);
}

std::vector<std::string> Session::unfinalized() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto &it : items_)
    if (!final_locked(it.item_id))
      out.push_back(it.item_id);
  return out;
}

SuccessReport Session::success_rates() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> open;
  for (const auto &it : items_)
    if (!final_locked(it.item_id))
      open.push_back(it.item_id);
  if (!open.empty()) {
    std::string msg = "unfinalized items:";
    for (const auto &id : open)
      msg += " " + id;
    throw Conflict(msg);
  }
  SuccessReport rep;
  for (Method me : cfg_.methods) {
    MethodResults mr;
    mr.method = me;
    std::map<std::string, bool> patient_ok;
    for (const auto &it : items_) {
      if (it.method != me)
        continue;
      const int score = final_locked(it.item_id)->final_score;
      const bool ok = score >= kSuccessScore;
      ++mr.distribution[static_cast<std::size_t>(score)];
      ++mr.acquisitions.total;
      mr.acquisitions.successes += ok;
      const std::string key = std::string(to_string(it.stage)) + "/" +
                              std::string(to_string(it.view)) + "/" +
                              std::string(to_string(it.occlusion));
      ++mr.strata[key].total;
      mr.strata[key].successes += ok;
      auto [pit, fresh] = patient_ok.emplace(it.patient_id, ok);
      if (!fresh)
        pit->second = pit->second && ok;
    }
    for (const auto &[p, ok] : patient_ok) {
      ++mr.patients.total;
      mr.patients.successes += ok;
      rep.per_patient[p][me] = ok;
    }
    rep.methods.push_back(std::move(mr));
  }
  if (cfg_.methods.size() >= 2) {
    const Method a = cfg_.methods[0], b = cfg_.methods[1];
    for (const auto &[p, outcomes] : rep.per_patient) {
      auto ia = outcomes.find(a), ib = outcomes.find(b);
      if (ia == outcomes.end() || ib == outcomes.end())
        continue;
      ++rep.paired_patients;
      rep.b += ia->second && !ib->second;
      rep.c += !ia->second && ib->second;
    }
    try {
      rep.mcnemar = stats::mcnemar(rep.b, rep.c);
    } catch (const Error &e) {
      rep.mcnemar_error = e.what();
    }
  }
  return rep;
}

json Session::rater_payload(const std::string &rater) const {
  const auto order = order_for(rater);
  json items = json::array();
  int rated = 0;
  int pos = 0;
  for (const auto &id : order) {
    json j{{"item_id", id}, {"position", pos++}, {"image_url", "/items/" + id + "/image"}};
    if (auto r = latest(id, rater)) {
      j["score"] = r->score;
      ++rated;
    } else {
      j["score"] = nullptr;
    }
    if (!cfg_.blinded) {
      const auto &it = item(id);
      j["method"] = to_string(it.method);
      j["case_id"] = it.case_id;
    }
    items.push_back(std::move(j));
  }
  return {{"schema_version", report::kSchemaVersion},
          {"session_id", id_},
          {"rater", rater},
          {"total", order.size()},
          {"rated", rated},
          {"rubric", rubric()},
          {"items", items}};
}

json to_json(const SuccessReport &r) {
  auto rate = [](const Rate &x) {
    return json{{"successes", x.successes}, {"total", x.total}, {"rate", x.value()}};
  };
  json methods = json::array();
  for (const auto &m : r.methods) {
    json strata = json::object();
    for (const auto &[k, v] : m.strata)
      strata[k] = rate(v);
    methods.push_back({{"method", to_string(m.method)},
                       {"acquisitions", rate(m.acquisitions)},
                       {"patients", rate(m.patients)},
                       {"strata", strata},
                       {"distribution", m.distribution}});
  }
  json per_patient = json::object();
  for (const auto &[p, outcomes] : r.per_patient) {
    json o = json::object();
    for (const auto &[me, ok] : outcomes)
      o[std::string(to_string(me))] = ok;
    per_patient[p] = o;
  }
  json mc{{"b", r.b}, {"c", r.c}, {"paired_patients", r.paired_patients}};
  if (r.mcnemar) {
    mc["statistic"] = r.mcnemar->statistic;
    mc["p_value"] = r.mcnemar->p_value;
    mc["exact"] = r.mcnemar->exact;
  } else {
    mc["error"] = r.mcnemar_error;
  }
  return {{"schema_version", report::kSchemaVersion},
          {"methods", methods},
          {"mcnemar", mc},
          {"per_patient", per_patient}};
}

Grid<io::Rgb> overlay_composite(const Image16 &minip, const TerritoryMask &mask) {
  require_same_shape(minip.shape(), mask.shape(), "overlay_composite");
  std::vector<std::uint16_t> v(minip.pixels().begin(), minip.pixels().end());
  std::sort(v.begin(), v.end());
  const double lo = v[v.size() / 200], hi = v[v.size() - 1 - v.size() / 200];
  const double span = std::max(1.0, hi - lo);
  static constexpr io::Rgb kColor[3] = {{0, 0, 0}, {230, 60, 40}, {40, 120, 230}};
  Grid<io::Rgb> out(minip.shape());
  for (int y = 0; y < minip.height(); ++y)
    for (int x = 0; x < minip.width(); ++x) {
      const double g = std::clamp((minip(x, y) - lo) / span, 0.0, 1.0) * 255.0;
      const auto l = static_cast<std::uint8_t>(mask.at(x, y));
      io::Rgb px{static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g),
                 static_cast<std::uint8_t>(g)};
      if (l != 0) {
        bool edge = false;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int nx = x + dx, ny = y + dy;
          if (!mask.labels().contains(nx, ny) || mask.labels()(nx, ny) != l)
            edge = true;
        }
        const double a = edge ? 1.0 : 0.3;
        for (int k = 0; k < 3; ++k)
          px[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(
              (1 - a) * px[static_cast<std::size_t>(k)] + a * kColor[l][static_cast<std::size_t>(k)]);
      }
      out(x, y) = px;
    }
  return out;
}

} // namespace vterr::rating

#include "vterr/rating_server.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <regex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vterr/io.hpp"

namespace vterr::rating {

using nlohmann::json;

namespace {

class BadRequest : public RatingError {
public:
  using RatingError::RatingError;
};

json body_of(const httplib::Request &req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object())
      throw BadRequest("request body must be a JSON object");
    return j;
  } catch (const json::parse_error &e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
}

template <class T> T field(const json &j, const char *key) {
  if (!j.contains(key))
    throw BadRequest(std::string("missing field ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw BadRequest(std::string("bad type for field ") + key);
  }
}

void send_json(httplib::Response &res, json j, int status = 200) {
  j["schema_version"] = report::kSchemaVersion;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &msg,
                json extra = json::object()) {
  extra["error"] = msg;
  send_json(res, std::move(extra), status);
}

json rating_json(const LikertRating &r) {
  return {{"item_id", r.item_id},
          {"rater_id", r.rater_id},
          {"score", r.score},
          {"timestamp", r.timestamp},
          {"revision", r.revision}};
}

bool valid_id(const std::string &s) {
  static const std::regex re("[A-Za-z0-9_-]{1,64}");
  return std::regex_match(s, re);
}

} // namespace

struct RatingServer::Impl {
  ServerOptions opt;
  httplib::Server http;
  std::thread worker;
  int port = -1;
  std::atomic<std::uint64_t> counter{0};

  mutable std::shared_mutex mu;
  std::map<std::string, std::unique_ptr<Session>> sessions;

  std::mutex image_mu;
  std::map<std::string, std::string> images;

  explicit Impl(ServerOptions o) : opt(std::move(o)) {
    if (opt.data_dir.empty())
      throw RatingError("data_dir is required");
    std::filesystem::create_directories(opt.data_dir);
    for (const auto &e : std::filesystem::directory_iterator(opt.data_dir)) {
      if (e.path().extension() != ".jsonl")
        continue;
      auto s = Session::replay(e.path());
      sessions.emplace(s->id(), std::move(s));
    }
    routes();
  }

  Session &find_session(const std::string &id) {
    std::shared_lock lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end())
      throw NotFound("unknown session " + id);
    return *it->second;
  }

  Session &session_of_item(const std::string &item_id) {
    std::shared_lock lock(mu);
    for (auto &[id, s] : sessions)
      if (s->has_item(item_id))
        return *s;
    throw NotFound("unknown item " + item_id);
  }

  template <class F> httplib::Server::Handler guard(F f) {
    return [f](const httplib::Request &req, httplib::Response &res) {
      try {
        f(req, res);
      } catch (const NotFound &e) {
        send_error(res, 404, e.what());
      } catch (const Conflict &e) {
        send_error(res, 409, e.what());
      } catch (const Error &e) {
        send_error(res, 400, e.what());
      } catch (const json::exception &e) {
        send_error(res, 400, e.what());
      } catch (const std::exception &e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void create_session(const httplib::Request &req, httplib::Response &res) {
    const json b = body_of(req);
    SessionConfig cfg;
    cfg.raters = field<std::vector<std::string>>(b, "raters");
    if (b.contains("adjudicator"))
      cfg.adjudicator = field<std::string>(b, "adjudicator");
    if (b.contains("seed"))
      cfg.seed = field<std::uint64_t>(b, "seed");
    if (b.contains("blinded"))
      cfg.blinded = field<bool>(b, "blinded");
    if (b.contains("methods")) {
      cfg.methods.clear();
      for (const auto &m : field<std::vector<std::string>>(b, "methods"))
        cfg.methods.push_back(parse_method(m));
    }
    const auto manifest = report::load_manifest(field<std::string>(b, "manifest"));

    std::unique_lock lock(mu);
    std::string id;
    if (b.contains("session_id")) {
      id = field<std::string>(b, "session_id");
      if (!valid_id(id))
        throw BadRequest("session_id must match [A-Za-z0-9_-]{1,64}");
      if (sessions.count(id))
        throw Conflict("session " + id + " already exists");
    } else {
      const auto t = static_cast<std::uint64_t>(
          std::chrono::system_clock::now().time_since_epoch().count());
      do {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%08llx",
                      static_cast<unsigned long long>((t ^ (counter++ * 0x9e3779b97f4a7c15ULL)) &
                                                      0xffffffffULL));
        id = buf;
      } while (sessions.count(id));
    }
    auto s = Session::create(id, manifest, cfg, opt.data_dir / (id + ".jsonl"));
    json j{{"session_id", id},
           {"items", s->items().size()},
           {"raters", cfg.raters},
           {"adjudicator", cfg.adjudicator},
           {"blinded", cfg.blinded}};
    sessions.emplace(id, std::move(s));
    send_json(res, j, 201);
  }

  void items(const httplib::Request &req, httplib::Response &res) {
    Session &s = find_session(req.matches[1]);
    if (!req.has_param("rater"))
      throw BadRequest("query parameter rater is required");
    send_json(res, s.rater_payload(req.get_param_value("rater")));
  }

  void image(const httplib::Request &req, httplib::Response &res) {
    const std::string item_id = req.matches[1];
    std::string png;
    {
      std::lock_guard lock(image_mu);
      if (auto it = images.find(item_id); it != images.end())
        png = it->second;
    }
    if (png.empty()) {
      const RatingItem &it = session_of_item(item_id).item(item_id);
      const auto bytes =
          io::encode_png_rgb(overlay_composite(io::read_png16(it.minip), io::load_mask(it.overlay)));
      png.assign(bytes.begin(), bytes.end());
      std::lock_guard lock(image_mu);
      images.emplace(item_id, png);
    }
    res.set_header("X-Schema-Version", std::to_string(report::kSchemaVersion));
    res.set_content(png, "image/png");
  }

  void rating(const httplib::Request &req, httplib::Response &res) {
    const json b = body_of(req);
    const auto item_id = field<std::string>(b, "item_id");
    Session &s = session_of_item(item_id);
    const auto r = s.submit_rating(item_id, field<std::string>(b, "rater_id"),
                                   field<int>(b, "score"), b.value("timestamp", ""));
    send_json(res, {{"rating", rating_json(r)}}, 201);
  }

  void consensus_list(const httplib::Request &req, httplib::Response &res) {
    Session &s = find_session(req.matches[1]);
    const auto &raters = s.config().raters;
    json pending = json::array();
    for (const auto &id : s.pending_consensus()) {
      json scores = json::object();
      for (const auto &r : raters)
        if (auto l = s.latest(id, r))
          scores[r] = l->score;
      pending.push_back(
          {{"item_id", id}, {"image_url", "/items/" + id + "/image"}, {"scores", scores}});
    }
    json finalized = json::array();
    for (const auto &it : s.items())
      if (auto f = s.final_record(it.item_id))
        finalized.push_back({{"item_id", f->item_id},
                             {"final_score", f->final_score},
                             {"resolved_by", to_string(f->resolved_by)}});
    send_json(res, {{"session_id", s.id()},
                    {"adjudicator", s.config().adjudicator},
                    {"rubric", rubric()},
                    {"pending", pending},
                    {"finalized", finalized}});
  }

  void consensus(const httplib::Request &req, httplib::Response &res) {
    const json b = body_of(req);
    const auto item_id = field<std::string>(b, "item_id");
    Session &s = session_of_item(item_id);
    const auto r = s.submit_consensus(item_id, field<std::string>(b, "adjudicator"),
                                      field<int>(b, "score"), b.value("timestamp", ""));
    send_json(res,
              {{"consensus",
                {{"item_id", r.item_id},
                 {"final_score", r.final_score},
                 {"resolved_by", to_string(r.resolved_by)}}}},
              201);
  }

  void results(const httplib::Request &req, httplib::Response &res) {
    Session &s = find_session(req.matches[1]);
    if (auto open = s.unfinalized(); !open.empty()) {
      send_error(res, 409, std::to_string(open.size()) + " items are not finalized",
                 {{"unfinalized", open}});
      return;
    }
    json j = to_json(s.success_rates());
    j["session_id"] = s.id();
    send_json(res, j);
  }

  void audit(const httplib::Request &req, httplib::Response &res) {
    const std::string item_id = req.matches[1];
    Session &s = session_of_item(item_id);
    json events = json::array();
    for (const auto &r : s.audit(item_id))
      events.push_back(rating_json(r));
    json j{{"item_id", item_id}, {"ratings", events}};
    if (auto f = s.final_record(item_id))
      j["final"] = {{"final_score", f->final_score},
                    {"resolved_by", to_string(f->resolved_by)}};
    send_json(res, j);
  }

  void routes() {
    using R = const httplib::Request &;
    using W = httplib::Response &;
    http.Post("/sessions", guard([this](R q, W s) { create_session(q, s); }));
    http.Get(R"(/sessions/([^/]+)/items)", guard([this](R q, W s) { items(q, s); }));
    http.Get(R"(/sessions/([^/]+)/consensus)", guard([this](R q, W s) { consensus_list(q, s); }));
    http.Get(R"(/sessions/([^/]+)/results)", guard([this](R q, W s) { results(q, s); }));
    http.Get(R"(/items/([^/]+)/image)", guard([this](R q, W s) { image(q, s); }));
    http.Get(R"(/items/([^/]+)/audit)", guard([this](R q, W s) { audit(q, s); }));
    http.Post("/ratings", guard([this](R q, W s) { rating(q, s); }));
    http.Post("/consensus", guard([this](R q, W s) { consensus(q, s); }));
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Options(R"(.*)", [](R, W s) {
      s.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      s.set_header("Access-Control-Allow-Headers", "Content-Type");
      s.status = 204;
    });
    http.set_error_handler([](R, W s) {
      if (s.body.empty())
        send_error(s, s.status, "no route");
    });
  }
};

RatingServer::RatingServer(ServerOptions opt) : impl_(std::make_unique<Impl>(std::move(opt))) {}

RatingServer::~RatingServer() { stop(); }

int RatingServer::bind() {
  if (impl_->port >= 0)
    return impl_->port;
  if (impl_->opt.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->opt.host);
  } else {
    if (!impl_->http.bind_to_port(impl_->opt.host, impl_->opt.port))
      impl_->port = -1;
    else
      impl_->port = impl_->opt.port;
  }
  if (impl_->port < 0)
    throw RatingError("cannot bind " + impl_->opt.host + ":" + std::to_string(impl_->opt.port));
  return impl_->port;
}

void RatingServer::listen() {
  bind();
  impl_->http.listen_after_bind();
}

int RatingServer::start() {
  const int p = bind();
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return p;
}

void RatingServer::stop() {
  if (!impl_)
    return;
  impl_->http.stop();
  if (impl_->worker.joinable())
    impl_->worker.join();
}

int RatingServer::port() const { return impl_->port; }

std::size_t RatingServer::session_count() const {
  std::shared_lock lock(impl_->mu);
  return impl_->sessions.size();
}

Session *RatingServer::session(const std::string &id) {
  std::shared_lock lock(impl_->mu);
  auto it = impl_->sessions.find(id);
  return it == impl_->sessions.end() ? nullptr : it->second.get();
}

} // namespace vterr::rating

#include <gtest/gtest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rating_fixture.hpp"
#include "vterr/rating_server.hpp"

using namespace vterr;
using namespace vterr::rating;
using nlohmann::json;

namespace {

struct Reply {
  int status = 0;
  json body;
  std::string raw;
  std::string content_type;
};

class Api {
public:
  explicit Api(int port) : cli_("127.0.0.1", port) {}

  Reply get(const std::string &path) { return wrap(cli_.Get(path)); }
  Reply post(const std::string &path, const json &body) {
    return wrap(cli_.Post(path, body.dump(), "application/json"));
  }
  Reply post_raw(const std::string &path, const std::string &body) {
    return wrap(cli_.Post(path, body, "application/json"));
  }

private:
  static Reply wrap(const httplib::Result &r) {
    if (!r)
      throw std::runtime_error("request failed");
    Reply out{r->status, {}, r->body, r->get_header_value("Content-Type")};
    if (out.content_type == "application/json")
      out.body = json::parse(r->body);
    return out;
  }
  httplib::Client cli_;
};

} // namespace

TEST(RatingHttp, FullRoundTrip) {
  const auto dir = fixture::fresh_dir("http_roundtrip");
  const auto manifest = fixture::rating_cohort(dir, 10);
  RatingServer server({dir / "data"});
  Api api(server.start());

  auto r = api.post("/sessions", {{"manifest", manifest.string()},
                                  {"raters", {"r1", "r2"}},
                                  {"adjudicator", "adj"},
                                  {"seed", 5},
                                  {"session_id", "trial"}});
  ASSERT_EQ(r.status, 201) << r.raw;
  EXPECT_EQ(r.body.at("items"), 20);
  EXPECT_EQ(r.body.at("schema_version"), 1);

  const auto l1 = api.get("/sessions/trial/items?rater=r1");
  const auto l2 = api.get("/sessions/trial/items?rater=r2");
  ASSERT_EQ(l1.status, 200);
  EXPECT_EQ(l1.raw.find("MODEL"), std::string::npos);
  EXPECT_EQ(l1.raw.find("ATLAS"), std::string::npos);
  EXPECT_NE(l1.body.at("items"), l2.body.at("items"));

  const auto img = api.get(l1.body.at("items")[0].at("image_url").get<std::string>());
  ASSERT_EQ(img.status, 200);
  EXPECT_EQ(img.content_type, "image/png");
  EXPECT_EQ(img.raw.substr(1, 3), "PNG");

  // Plant MODEL 8/10 and ATLAS 6/10 with (b, c) = (3, 1); ids come from the
  // server-side session so the scoring stays blinded on the wire.
  Session *s = server.session("trial");
  ASSERT_NE(s, nullptr);
  std::string disputed;
  for (const auto &it : s->items()) {
    const int i = std::stoi(it.case_id.substr(1));
    const bool ok = it.method == Method::Model ? i <= 7 : (i <= 4 || i == 8);
    const int score = ok ? 3 : 0;
    int s2 = score;
    if (it.method == Method::Model && i == 9) {
      s2 = 2;
      disputed = it.item_id;
    }
    ASSERT_EQ(api.post("/ratings", {{"item_id", it.item_id}, {"rater_id", "r1"}, {"score", score}})
                  .status,
              201);
    ASSERT_EQ(api.post("/ratings", {{"item_id", it.item_id}, {"rater_id", "r2"}, {"score", s2}})
                  .status,
              201);
  }

  auto res = api.get("/sessions/trial/results");
  EXPECT_EQ(res.status, 409);
  EXPECT_EQ(res.body.at("unfinalized"), json::array({disputed}));

  const auto pending = api.get("/sessions/trial/consensus");
  ASSERT_EQ(pending.body.at("pending").size(), 1u);
  EXPECT_EQ(pending.body.at("pending")[0].at("scores").at("r2"), 2);
  EXPECT_EQ(api.post("/consensus", {{"item_id", disputed}, {"adjudicator", "r1"}, {"score", 1}})
                .status,
            409);
  EXPECT_EQ(api.post("/consensus", {{"item_id", disputed}, {"adjudicator", "adj"}, {"score", 1}})
                .status,
            201);

  res = api.get("/sessions/trial/results");
  ASSERT_EQ(res.status, 200) << res.raw;
  const auto &methods = res.body.at("methods");
  EXPECT_EQ(methods[0].at("method"), "MODEL");
  EXPECT_EQ(methods[0].at("acquisitions").at("successes"), 8);
  EXPECT_EQ(methods[1].at("acquisitions").at("successes"), 6);
  EXPECT_EQ(res.body.at("mcnemar").at("b"), 3);
  EXPECT_EQ(res.body.at("mcnemar").at("c"), 1);
  EXPECT_DOUBLE_EQ(res.body.at("mcnemar").at("p_value").get<double>(),
                   stats::mcnemar(3, 1).p_value);

  const auto audit = api.get("/items/" + disputed + "/audit");
  EXPECT_EQ(audit.body.at("ratings").size(), 2u);
  EXPECT_EQ(audit.body.at("final").at("resolved_by"), "CONSENSUS");
  server.stop();

  // restart replays the log
  RatingServer again({dir / "data"});
  Api api2(again.start());
  EXPECT_EQ(again.session_count(), 1u);
  EXPECT_EQ(api2.get("/sessions/trial/results").body.at("mcnemar").at("b"), 3);
  EXPECT_EQ(api2.get("/sessions/trial/items?rater=r1").body.at("rated"), 20);
}

TEST(RatingHttp, ErrorCodes) {
  const auto dir = fixture::fresh_dir("http_errors");
  const auto manifest = fixture::rating_cohort(dir, 2);
  RatingServer server({dir / "data"});
  Api api(server.start());

  EXPECT_EQ(api.post_raw("/sessions", "{not json").status, 400);
  EXPECT_EQ(api.post("/sessions", {{"raters", {"a", "b"}}}).status, 400);
  EXPECT_EQ(api.post("/sessions", {{"manifest", manifest.string()}, {"raters", {"a"}}}).status,
            400);
  EXPECT_EQ(api.post("/sessions", {{"manifest", manifest.string()},
                                   {"raters", {"a", "b"}},
                                   {"session_id", "../x"}})
                .status,
            400);
  const auto created = api.post("/sessions", {{"manifest", manifest.string()},
                                              {"raters", {"a", "b"}}});
  ASSERT_EQ(created.status, 201);
  const std::string sid = created.body.at("session_id");
  EXPECT_EQ(api.post("/sessions",
                     {{"manifest", manifest.string()}, {"raters", {"a", "b"}}, {"session_id", sid}})
                .status,
            409);

  EXPECT_EQ(api.get("/sessions/nope/items?rater=a").status, 404);
  EXPECT_EQ(api.get("/sessions/" + sid + "/items").status, 400);
  EXPECT_EQ(api.get("/sessions/" + sid + "/items?rater=zed").status, 404);
  EXPECT_EQ(api.get("/items/nope/image").status, 404);
  const auto err = api.get("/no/such/route");
  EXPECT_EQ(err.status, 404);
  EXPECT_TRUE(err.body.contains("error"));

  const std::string item = server.session(sid)->items()[0].item_id;
  EXPECT_EQ(api.post("/ratings", {{"item_id", item}, {"rater_id", "a"}, {"score", 4}}).status, 400);
  EXPECT_EQ(api.post("/ratings", {{"item_id", item}, {"rater_id", "a"}, {"score", "2"}}).status,
            400);
  EXPECT_EQ(api.post("/ratings", {{"item_id", "x"}, {"rater_id", "a"}, {"score", 2}}).status, 404);
  EXPECT_EQ(api.post("/consensus", {{"item_id", item}, {"adjudicator", "adjudicator"}, {"score", 2}})
                .status,
            409);
  EXPECT_EQ(api.get("/sessions/" + sid + "/results").status, 409);
}

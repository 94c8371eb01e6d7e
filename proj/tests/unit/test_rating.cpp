#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "rating_fixture.hpp"
#include "vterr/rating.hpp"

using namespace vterr;
using namespace vterr::rating;
namespace fs = std::filesystem;

namespace {

SessionConfig two_raters(std::uint64_t seed = 7) {
  SessionConfig c;
  c.raters = {"r1", "r2"};
  c.adjudicator = "adj";
  c.seed = seed;
  return c;
}

std::string item_of(const Session &s, const std::string &case_id, Method m) {
  for (const auto &it : s.items())
    if (it.case_id == case_id && it.method == m)
      return it.item_id;
  throw std::runtime_error("no item");
}

void rate_both(Session &s, const std::string &item, int score) {
  s.submit_rating(item, "r1", score);
  s.submit_rating(item, "r2", score);
}

} // namespace

TEST(RatingSession, EnumeratesOneItemPerCaseAndMethod) {
  const auto dir = fixture::fresh_dir("rating_enum");
  const auto m = report::load_manifest(fixture::rating_cohort(dir, 10));
  const auto s = Session::create("s1", m, two_raters());
  ASSERT_EQ(s->items().size(), 20u);
  std::set<std::string> ids;
  for (const auto &it : s->items()) {
    ids.insert(it.item_id);
    EXPECT_EQ(it.item_id.rfind("s1-", 0), 0u);
  }
  EXPECT_EQ(ids.size(), 20u);

  auto o1 = s->order_for("r1"), o2 = s->order_for("r2");
  EXPECT_NE(o1, o2);
  std::sort(o1.begin(), o1.end());
  std::sort(o2.begin(), o2.end());
  EXPECT_EQ(o1, o2);
  EXPECT_EQ(std::set<std::string>(o1.begin(), o1.end()), ids);
  EXPECT_THROW(s->order_for("stranger"), NotFound);
}

TEST(RatingSession, RejectsBadConfiguration) {
  const auto dir = fixture::fresh_dir("rating_cfg");
  auto m = report::load_manifest(fixture::rating_cohort(dir, 2));
  auto cfg = two_raters();
  cfg.raters = {"r1", "r1"};
  EXPECT_THROW(Session::create("s", m, cfg), RatingError);
  cfg = two_raters();
  cfg.adjudicator = "r2";
  EXPECT_THROW(Session::create("s", m, cfg), RatingError);
  m.cases[1].predictions.erase(Method::Atlas);
  try {
    Session::create("s", m, two_raters());
    FAIL();
  } catch (const RatingError &e) {
    EXPECT_NE(std::string(e.what()).find("missing mask"), std::string::npos);
  }
}

TEST(RatingSession, ScoresAreValidatedAndRevised) {
  const auto dir = fixture::fresh_dir("rating_rev");
  const auto s = Session::create("s", report::load_manifest(fixture::rating_cohort(dir, 2)),
                                 two_raters());
  const auto id = s->items()[0].item_id;
  EXPECT_THROW(s->submit_rating(id, "r1", 5), RatingError);
  EXPECT_THROW(s->submit_rating(id, "r1", -1), RatingError);
  EXPECT_THROW(s->submit_rating("nope", "r1", 1), NotFound);
  EXPECT_THROW(s->submit_rating(id, "r9", 1), NotFound);
  EXPECT_EQ(s->submit_rating(id, "r1", 1).revision, 0);
  EXPECT_EQ(s->submit_rating(id, "r1", 3).revision, 1);
  const auto trail = s->audit(id);
  ASSERT_EQ(trail.size(), 2u);
  EXPECT_EQ(trail[0].score, 1);
  EXPECT_EQ(trail[1].score, 3);
  EXPECT_FALSE(trail[0].timestamp.empty());
  EXPECT_EQ(s->latest(id, "r1")->score, 3);
  EXPECT_FALSE(s->latest(id, "r2"));
}

TEST(RatingSession, ConsensusWorkflow) {
  const auto dir = fixture::fresh_dir("rating_consensus");
  const auto s = Session::create("s", report::load_manifest(fixture::rating_cohort(dir, 2)),
                                 two_raters());
  const auto a = s->items()[0].item_id, b = s->items()[1].item_id, c = s->items()[2].item_id;
  rate_both(*s, a, 2);
  EXPECT_EQ(s->final_record(a)->resolved_by, Resolution::Agreement);
  EXPECT_EQ(s->final_record(a)->final_score, 2);

  s->submit_rating(b, "r1", 1);
  s->submit_rating(b, "r2", 3);
  s->submit_rating(c, "r1", 0);
  EXPECT_EQ(s->pending_consensus(), std::vector<std::string>{b});
  EXPECT_FALSE(s->final_record(b));

  EXPECT_THROW(s->submit_consensus(b, "r1", 2), Conflict);
  EXPECT_THROW(s->submit_consensus(a, "adj", 3), Conflict);
  EXPECT_THROW(s->submit_consensus(c, "adj", 3), Conflict);
  EXPECT_THROW(s->success_rates(), Conflict);

  const auto rec = s->submit_consensus(b, "adj", 2);
  EXPECT_EQ(rec.resolved_by, Resolution::Consensus);
  EXPECT_TRUE(s->pending_consensus().empty());
  EXPECT_EQ(s->final_record(b)->final_score, 2);

  // A later revision reopens the disagreement.
  s->submit_rating(b, "r1", 0);
  EXPECT_EQ(s->pending_consensus(), std::vector<std::string>{b});
  // ...and a matching revision finalizes by agreement.
  s->submit_rating(b, "r1", 3);
  EXPECT_EQ(s->final_record(b)->resolved_by, Resolution::Agreement);
}

TEST(RatingSession, PlantedSuccessRates) {
  const auto dir = fixture::fresh_dir("rating_planted");
  const auto s = Session::create("s", report::load_manifest(fixture::rating_cohort(dir, 10)),
                                 two_raters());
  // patients 0-4 both succeed, 5-7 only MODEL, 8 only ATLAS, 9 neither
  for (int i = 0; i < 10; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "c%03d", i);
    const bool model_ok = i <= 7, atlas_ok = i <= 4 || i == 8;
    const auto mi = item_of(*s, id, Method::Model), ai = item_of(*s, id, Method::Atlas);
    if (model_ok) {
      rate_both(*s, mi, 3);
    } else {
      // disagreement resolved to a failure
      s->submit_rating(mi, "r1", 2);
      s->submit_rating(mi, "r2", 0);
      s->submit_consensus(mi, "adj", 1);
    }
    rate_both(*s, ai, atlas_ok ? 2 : 1);
  }
  const auto r = s->success_rates();
  ASSERT_EQ(r.methods.size(), 2u);
  EXPECT_EQ(r.methods[0].method, Method::Model);
  EXPECT_EQ(r.methods[0].acquisitions.successes, 8);
  EXPECT_EQ(r.methods[0].patients.successes, 8);
  EXPECT_DOUBLE_EQ(r.methods[0].acquisitions.value(), 0.8);
  EXPECT_EQ(r.methods[1].acquisitions.successes, 6);
  EXPECT_EQ(r.methods[1].acquisitions.total, 10);
  EXPECT_EQ(r.methods[0].distribution[3], 8);
  EXPECT_EQ(r.methods[0].distribution[1], 2);
  EXPECT_EQ(r.b, 3);
  EXPECT_EQ(r.c, 1);
  EXPECT_EQ(r.paired_patients, 10);
  ASSERT_TRUE(r.mcnemar);
  const auto expect = stats::mcnemar(3, 1);
  EXPECT_DOUBLE_EQ(r.mcnemar->p_value, expect.p_value);
  EXPECT_DOUBLE_EQ(r.mcnemar->statistic, expect.statistic);
  int strata_total = 0;
  for (const auto &[k, rate] : r.methods[0].strata)
    strata_total += rate.total;
  EXPECT_EQ(strata_total, 10);
  EXPECT_TRUE(r.methods[0].strata.count("POST_EVT/AP/M1")) << r.methods[0].strata.begin()->first;

  const auto j = to_json(r);
  EXPECT_EQ(j.at("mcnemar").at("b"), 3);
  EXPECT_EQ(j.at("methods").size(), 2u);
}

TEST(RatingSession, PatientSuccessNeedsEveryView) {
  const auto dir = fixture::fresh_dir("rating_patient");
  SessionConfig cfg = two_raters();
  cfg.methods = {Method::Model};
  const auto s =
      Session::create("s", report::load_manifest(fixture::rating_cohort(dir, 4, 2)), cfg);
  rate_both(*s, item_of(*s, "c000", Method::Model), 3);
  rate_both(*s, item_of(*s, "c001", Method::Model), 1);
  rate_both(*s, item_of(*s, "c002", Method::Model), 2);
  rate_both(*s, item_of(*s, "c003", Method::Model), 2);
  const auto r = s->success_rates();
  EXPECT_EQ(r.methods[0].acquisitions.successes, 3);
  EXPECT_EQ(r.methods[0].patients.successes, 1);
  EXPECT_EQ(r.methods[0].patients.total, 2);
  EXPECT_FALSE(r.per_patient.at("p0").at(Method::Model));
  EXPECT_FALSE(r.mcnemar);
}

TEST(RatingSession, BlindedPayloadHidesMethod) {
  const auto dir = fixture::fresh_dir("rating_blind");
  const auto m = report::load_manifest(fixture::rating_cohort(dir, 3));
  const auto s = Session::create("s", m, two_raters());
  s->submit_rating(s->items()[0].item_id, "r1", 2);
  const auto p = s->rater_payload("r1");
  const std::string text = p.dump();
  EXPECT_EQ(text.find("MODEL"), std::string::npos);
  EXPECT_EQ(text.find("ATLAS"), std::string::npos);
  EXPECT_EQ(text.find("c00"), std::string::npos);
  EXPECT_EQ(p.at("total"), 6);
  EXPECT_EQ(p.at("rated"), 1);
  EXPECT_EQ(p.at("rubric").size(), 4u);

  auto cfg = two_raters();
  cfg.blinded = false;
  const auto open = Session::create("o", m, cfg)->rater_payload("r2").dump();
  EXPECT_NE(open.find("MODEL"), std::string::npos);
}

TEST(RatingSession, ReplayRestoresState) {
  const auto dir = fixture::fresh_dir("rating_replay");
  const auto m = report::load_manifest(fixture::rating_cohort(dir, 4));
  const auto log = dir / "s.jsonl";
  std::vector<std::string> order;
  std::string pending;
  {
    auto s = Session::create("s", m, two_raters(99), log);
    order = s->order_for("r2");
    rate_both(*s, s->items()[0].item_id, 2);
    pending = s->items()[1].item_id;
    s->submit_rating(pending, "r1", 0);
    s->submit_rating(pending, "r2", 3);
    EXPECT_THROW(Session::create("s", m, two_raters(99), log), RatingError);
  }
  // torn trailing write
  std::ofstream(log, std::ios::app) << "{\"type\":\"rating\",\"ite";
  auto back = Session::replay(log);
  EXPECT_EQ(back->id(), "s");
  EXPECT_EQ(back->items().size(), 8u);
  EXPECT_EQ(back->order_for("r2"), order);
  EXPECT_EQ(back->final_record(back->items()[0].item_id)->final_score, 2);
  EXPECT_EQ(back->pending_consensus(), std::vector<std::string>{pending});
  back->submit_consensus(pending, "adj", 1);
  EXPECT_EQ(Session::replay(log)->final_record(pending)->final_score, 1);
}

TEST(RatingSession, OverlayComposite) {
  Image16 img(Shape{8, 8}, 100);
  img(0, 0) = 0;
  img(7, 7) = 1000;
  TerritoryMask mask(img.shape());
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x)
      mask.set(x, y, Label::MCA);
  const auto rgb = overlay_composite(img, mask);
  ASSERT_EQ(rgb.shape(), img.shape());
  const auto edge = rgb(2, 2), inside = rgb(3, 3), outside = rgb(0, 4);
  EXPECT_EQ(edge[0], 230);
  EXPECT_EQ(outside[0], outside[1]);
  EXPECT_GT(inside[0], inside[2]);
  EXPECT_THROW(overlay_composite(img, TerritoryMask(Shape{4, 4})), ShapeMismatch);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vterr/distance.hpp"
#include "vterr/metrics.hpp"

using namespace vterr;
using namespace vterr::metrics;

namespace {

BinaryMask pixels(int w, int h, std::initializer_list<std::pair<int, int>> pts) {
  BinaryMask m(Shape{w, h});
  for (auto [x, y] : pts)
    m.set(x, y);
  return m;
}

BinaryMask shifted(const BinaryMask &m, int dx, int dy) {
  BinaryMask o(m.shape());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) && o.contains(x + dx, y + dy))
        o.set(x + dx, y + dy);
  return o;
}

} // namespace

TEST(Metrics, OverlapFixtures) {
  const auto a = pixels(4, 4, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const auto b = pixels(4, 4, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  EXPECT_DOUBLE_EQ(dsc(a, b), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(dsc(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dsc(a, pixels(4, 4, {{3, 3}})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(a, pixels(4, 4, {{3, 3}})), 0.0);
  EXPECT_DOUBLE_EQ(dsc(BinaryMask(Shape{3, 3}), BinaryMask(Shape{3, 3})), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(BinaryMask(Shape{3, 3}), BinaryMask(Shape{3, 3})), 1.0);
  EXPECT_THROW(dsc(a, BinaryMask(Shape{3, 3})), ShapeMismatch);
}

TEST(Metrics, BoundaryDefinition) {
  EXPECT_EQ(boundary(pixels(5, 5, {{2, 2}})).size(), 1u);
  BinaryMask block(Shape{5, 5});
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x)
      block.set(x, y);
  EXPECT_EQ(boundary(block).size(), 8u);
  BinaryMask full(Shape{6, 4}, 1);
  EXPECT_EQ(boundary(full).size(), 2u * 6 + 2u * 2);
  EXPECT_THROW(boundary(BinaryMask(Shape{3, 3})), EmptyMaskError);
}

TEST(Metrics, SinglePixelsFiveApart) {
  const auto a = pixels(10, 3, {{1, 1}}), b = pixels(10, 3, {{6, 1}});
  EXPECT_DOUBLE_EQ(asd(a, b), 5.0);
  EXPECT_DOUBLE_EQ(hausdorff(a, b), 5.0);
  EXPECT_DOUBLE_EQ(asd(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(a, a), 0.0);
  EXPECT_THROW(asd(a, BinaryMask(a.shape())), EmptyMaskError);
}

TEST(Metrics, DistanceTransformMatchesBruteForce) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 40; ++i) {
    const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
    const auto f = oracle::random_mask(rng, w, h, 0.02 + 0.1 * (i % 3));
    const auto fast = squared_distance_transform(f);
    const auto slow = oracle::squared_edt(f);
    for (std::size_t k = 0; k < slow.size(); ++k)
      ASSERT_EQ(fast.pixels()[k], slow[k]);
  }
  const auto none = squared_distance_transform(BinaryMask(Shape{3, 3}));
  EXPECT_TRUE(std::isinf(none(1, 1)));
}

TEST(Metrics, SurfaceDistancesMatchBruteForce) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 60; ++i) {
    const auto a = oracle::random_mask(rng, 48, 48), b = oracle::random_mask(rng, 48, 48);
    double oasd = 0, ohd = 0;
    oracle::surface(a, b, oasd, ohd);
    const auto s = surface_distances(a, b);
    EXPECT_NEAR(s.asd, oasd, 1e-9);
    EXPECT_EQ(s.hd, ohd);
  }
}

TEST(Metrics, Properties) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    const auto a = oracle::random_mask(rng, 40, 40), b = oracle::random_mask(rng, 40, 40);
    const double d = dsc(a, b), j = jaccard(a, b);
    EXPECT_NEAR(j, d / (2 - d), 1e-12);
    EXPECT_EQ(d, dsc(b, a));
    EXPECT_EQ(j, jaccard(b, a));
    const auto ab = surface_distances(a, b), ba = surface_distances(b, a);
    EXPECT_NEAR(ab.asd, ba.asd, 1e-12);
    EXPECT_EQ(ab.hd, ba.hd);
    EXPECT_GE(ab.hd, ab.asd);
    EXPECT_GE(ab.asd, 0.0);
  }
}

TEST(Metrics, TranslationInvariance) {
  BinaryMask a(Shape{64, 64}), b(Shape{64, 64});
  for (int y = 10; y < 30; ++y)
    for (int x = 12; x < 35; ++x)
      a.set(x, y);
  for (int y = 15; y < 33; ++y)
    for (int x = 8; x < 28; ++x)
      b.set(x, y);
  const auto sa = shifted(a, 7, 11), sb = shifted(b, 7, 11);
  EXPECT_EQ(dsc(a, b), dsc(sa, sb));
  EXPECT_EQ(jaccard(a, b), jaccard(sa, sb));
  EXPECT_NEAR(asd(a, b), asd(sa, sb), 1e-12);
  EXPECT_EQ(hausdorff(a, b), hausdorff(sa, sb));
}

TEST(Metrics, EqualMasksAreZeroDistance) {
  std::mt19937_64 rng(12);
  const auto a = oracle::random_mask(rng, 32, 32);
  EXPECT_EQ(dsc(a, a), 1.0);
  EXPECT_EQ(asd(a, a), 0.0);
  EXPECT_EQ(hausdorff(a, a), 0.0);
}

TEST(Metrics, OverlapReportRows) {
  TerritoryMask ref(Shape{60, 40});
  for (int y = 5; y < 35; ++y)
    for (int x = 5; x < 55; ++x)
      ref.set(x, y, x < 30 ? Label::MCA : Label::ACA);
  const auto same = overlap_report(ref, ref);
  EXPECT_EQ(same.ica.dsc, 1.0);
  EXPECT_EQ(same.mca.dsc, 1.0);
  EXPECT_EQ(*same.mca.hd, 0.0);

  TerritoryMask swapped(ref.shape());
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 60; ++x)
      swapped.set(x, y, ref.at(x, y) == Label::MCA   ? Label::ACA
                        : ref.at(x, y) == Label::ACA ? Label::MCA
                                                     : Label::Background);
  const auto r = overlap_report(swapped, ref);
  EXPECT_EQ(r.ica.dsc, 1.0);
  EXPECT_EQ(r.mca.dsc, oracle::dsc(swapped.mca(), ref.mca()));
  EXPECT_LT(r.mca.dsc, 0.1);

  TerritoryMask no_mca(ref.shape());
  const auto absent = overlap_report(ref, no_mca);
  EXPECT_FALSE(absent.mca.present);
}

TEST(Metrics, TenPixelBoundaryShift) {
  // Concentric disks: every boundary point moves 10 px along its normal.
  const auto a = oracle::disk(160, 160, 80, 80, 30);
  const auto b = oracle::disk(160, 160, 80, 80, 40);
  double oasd = 0, ohd = 0;
  oracle::surface(a, b, oasd, ohd);
  const double v = asd(a, b);
  EXPECT_NEAR(v, oasd, 1e-9);
  EXPECT_GE(v, 8.0);
  EXPECT_LE(v, 12.0);

  const auto t = shifted(a, 10, 0);
  EXPECT_NEAR(hausdorff(a, t), 10.0, 1e-9);
}

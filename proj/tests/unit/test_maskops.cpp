#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vterr/maskops.hpp"

using namespace vterr;
using namespace vterr::maskops;

namespace {

BinaryMask and_not(const BinaryMask &a, const BinaryMask &b) {
  BinaryMask o(a.shape());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      o.set(x, y, a.at(x, y) && !b.at(x, y));
  return o;
}

BinaryMask block_with_line() {
  BinaryMask m(Shape{320, 140});
  for (int y = 20; y < 120; ++y)
    for (int x = 10; x < 110; ++x)
      m.set(x, y);
  for (int x = 110; x < 310; ++x)
    m.set(x, 70);
  return m;
}

} // namespace

TEST(MaskOps, SubtractBasics) {
  std::mt19937_64 rng(1);
  const auto a = oracle::random_mask(rng, 32, 32);
  EXPECT_TRUE(subtract(a, a).none());
  EXPECT_EQ(subtract(a, BinaryMask(a.shape())), a);
  for (int i = 0; i < 20; ++i) {
    const auto x = oracle::random_mask(rng, 32, 32, 0.5), y = oracle::random_mask(rng, 32, 32, 0.5);
    EXPECT_EQ(subtract(x, y), and_not(x, y));
  }
  EXPECT_THROW(subtract(BinaryMask(Shape{2, 2}), BinaryMask(Shape{3, 2})), ShapeMismatch);
}

TEST(MaskOps, ReconstructIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto ica = oracle::random_mask(rng, 40, 40);
    auto mca = oracle::random_mask(rng, 40, 40, 0.4);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        mca.set(x, y, mca.at(x, y) && ica.at(x, y));
    EXPECT_EQ(reconstruct_ica(subtract(ica, mca), mca), ica);
  }
  const auto m = oracle::random_mask(rng, 16, 16);
  EXPECT_EQ(reconstruct_ica(BinaryMask(m.shape()), m), m);
}

TEST(MaskOps, AssembleUsesMcaPrecedence) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto mca = oracle::random_mask(rng, 24, 24, 0.3), aca = oracle::random_mask(rng, 24, 24, 0.3);
    const auto t = assemble_label_map(mca, aca);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const Label want = mca.at(x, y) ? Label::MCA : aca.at(x, y) ? Label::ACA : Label::Background;
        EXPECT_EQ(t.at(x, y), want);
      }
  }
}

TEST(MaskOps, ErodeDilateMatchDiskOracle) {
  std::mt19937_64 rng(4);
  for (int r = 0; r <= 4; ++r)
    for (int i = 0; i < 5; ++i) {
      const auto m = oracle::random_mask(rng, 30, 26, i % 2 ? 0.6 : 0.0);
      EXPECT_EQ(erode(m, r), oracle::erode(m, r)) << "r=" << r;
      EXPECT_EQ(dilate(m, r), oracle::dilate(m, r)) << "r=" << r;
    }
  EXPECT_THROW(erode(BinaryMask(Shape{3, 3}), -1), Error);
}

TEST(MaskOps, ComponentCountsMatchUnionFind) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_mask(rng, 20, 20, 0.35);
    EXPECT_EQ(connected_components(m, Connectivity::Eight).count(), oracle::components(m, true));
    EXPECT_EQ(connected_components(m, Connectivity::Four).count(), oracle::components(m, false));
  }
}

TEST(MaskOps, CleanupRemovesAttachedLine) {
  const auto m = block_with_line();
  for (int r : {2, 3}) {
    const auto out = cleanup(m, MorphologyParams::with_radius(r)).mask;
    for (int x = 120; x < 310; ++x)
      EXPECT_FALSE(out.at(x, 70)) << "line survives at x=" << x;
    const double area = 100.0 * 100.0;
    EXPECT_NEAR(static_cast<double>(out.count()), area, 0.05 * area);
  }
}

TEST(MaskOps, CleanupKeepsLargestBlob) {
  BinaryMask m(Shape{100, 60});
  const auto big = oracle::disk(100, 60, 25, 30, 12.6);  // ~500 px
  const auto small = oracle::disk(100, 60, 80, 30, 4.0); // ~50 px
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 100; ++x)
      m.set(x, y, big.at(x, y) || small.at(x, y));
  const auto r = cleanup(m, MorphologyParams::with_radius(2));
  EXPECT_EQ(r.components_after_erosion, 2);
  EXPECT_EQ(connected_components(r.mask, Connectivity::Eight).count(), 1);
  EXPECT_FALSE(r.mask.at(80, 30));
  EXPECT_TRUE(r.mask.at(25, 30));
}

TEST(MaskOps, CleanupOfEmptyWarns) {
  const auto r = cleanup(BinaryMask(Shape{10, 10}));
  EXPECT_TRUE(r.empty_warning);
  EXPECT_TRUE(r.mask.none());
  BinaryMask speck(Shape{10, 10});
  speck.set(5, 5);
  EXPECT_TRUE(cleanup(speck).empty_warning);
}

TEST(MaskOps, CleanupKeepingAllIsOpening) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const auto m = oracle::random_mask(rng, 40, 40);
    auto p = MorphologyParams::with_radius(2);
    p.keep = Keep::All;
    const auto out = cleanup(m, p).mask;
    EXPECT_EQ(out, oracle::dilate(oracle::erode(m, 2), 2));
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (out.at(x, y))
          EXPECT_TRUE(m.at(x, y));
  }
}

TEST(MaskOps, FillHoles) {
  BinaryMask ring(Shape{9, 9});
  for (int y = 2; y <= 6; ++y)
    for (int x = 2; x <= 6; ++x)
      ring.set(x, y, x == 2 || x == 6 || y == 2 || y == 6);
  const auto f = fill_holes(ring);
  EXPECT_EQ(f.count(), 25u);
}

TEST(MaskOps, DeriveLabelMap) {
  BinaryMask ica(Shape{200, 120}), mca(Shape{200, 120});
  for (int y = 10; y < 110; ++y)
    for (int x = 10; x < 190; ++x) {
      ica.set(x, y);
      mca.set(x, y, x >= 100);
    }
  // One-pixel seam of MCA-annotation slack inside the ACA side.
  for (int y = 10; y < 110; ++y)
    mca.set(99, y, false);
  const auto d = derive_label_map(ica, mca);
  EXPECT_FALSE(d.aca_cleanup.empty_warning);
  EXPECT_EQ(d.labels.mca(), mca);
  for (auto v : d.labels.labels().pixels())
    EXPECT_LE(v, 2);
  EXPECT_GT(d.labels.aca().count(), 80u * 90u);
}

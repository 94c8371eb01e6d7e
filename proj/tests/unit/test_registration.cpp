#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "vterr/affine.hpp"
#include "vterr/metrics.hpp"
#include "vterr/registration.hpp"
#include "vterr/synth.hpp"

using namespace vterr;

namespace {

const synth::StandardCase &post_case() {
  static const synth::StandardCase c = [] {
    synth::PhantomSpec s;
    s.seed = 7;
    return synth::standard_case(synth::generate(s));
  }();
  return c;
}

double direct_ncc(const Image16 &a, const Image16 &b) {
  double ma = 0, mb = 0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ma += pa[i];
    mb += pb[i];
  }
  ma /= double(pa.size());
  mb /= double(pb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    sab += (pa[i] - ma) * (pb[i] - mb);
    saa += (pa[i] - ma) * (pa[i] - ma);
    sbb += (pb[i] - mb) * (pb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

void expect_near_transform(const AffineTransform2D &got, const AffineTransform2D &want,
                           double deg, double scale, double px) {
  EXPECT_NEAR(got.theta_deg, want.theta_deg, deg);
  EXPECT_NEAR(got.sx, want.sx, scale);
  EXPECT_NEAR(got.sy, want.sy, scale);
  EXPECT_NEAR(got.tx, want.tx, px);
  EXPECT_NEAR(got.ty, want.ty, px);
}

} // namespace

TEST(Affine, MatrixRoundTrip) {
  const Center c{511.5, 511.5};
  const AffineTransform2D t{7.0, 1.1, 0.95, 12.0, -30.0};
  const auto m = to_matrix(t, c);
  const auto back = to_params(m, c);
  expect_near_transform(back, t, 1e-9, 1e-12, 1e-9);
  const auto id = m.compose(m.inverse());
  EXPECT_NEAR(id.a, 1, 1e-12);
  EXPECT_NEAR(id.b, 0, 1e-12);
  EXPECT_NEAR(id.c, 0, 1e-9);
  // parametric inverse is exact for isotropic scale
  const auto inv = inverse(AffineTransform2D{7.0, 1.1, 1.1, 12.0, -30.0}, c);
  const auto m_iso = to_matrix(AffineTransform2D{7.0, 1.1, 1.1, 12.0, -30.0}, c);
  const auto round = to_matrix(inv, c).compose(m_iso);
  EXPECT_NEAR(round.c, 0, 1e-9);
  EXPECT_NEAR(round.e, 1, 1e-12);
  EXPECT_THROW((void)AffineMatrix({0, 0, 0, 0, 0, 0}).inverse(), Error);
}

TEST(Affine, WarpIdentityAndTranslation) {
  Image16 img(64, 64, 500);
  img(20, 30) = 10;
  EXPECT_EQ(warp(img, AffineMatrix::identity()), img);
  const auto moved = warp(img, AffineMatrix::translation(10, 0));
  EXPECT_EQ(moved(30, 30), 10);
  EXPECT_EQ(moved(20, 30), 500);
}

TEST(Affine, MaskRoundTripLoss) {
  const auto d = oracle::disk(1024, 1024, 511.5, 511.5, 200);
  TerritoryMask m(Shape{1024, 1024});
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 1024; ++x)
      if (d.at(x, y))
        m.set(x, y, x < 512 ? Label::MCA : Label::ACA);
  const Center c = Center::of(m.shape());
  for (double th : {-10.0, 3.0, 10.0}) {
    const AffineTransform2D t{th, 1.07, 0.94, 15, -8};
    const auto back = warp_mask(warp_mask(m, t), inverse(t, c));
    EXPECT_GE(metrics::dsc(back.ica(), m.ica()), 0.98);
    for (auto v : back.labels().pixels())
      EXPECT_LE(v, 2);
  }
}

TEST(Ncc, Properties) {
  std::mt19937 rng(3);
  Image16 a(50, 40), b(50, 40);
  for (auto &v : a.pixels())
    v = static_cast<std::uint16_t>(rng() % 3000);
  for (auto &v : b.pixels())
    v = static_cast<std::uint16_t>(rng() % 3000);
  EXPECT_NEAR(reg::ncc(a, a), 1.0, 1e-12);
  Image16 inv(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    inv.pixels()[i] = static_cast<std::uint16_t>(4000 - a.pixels()[i]);
  EXPECT_NEAR(reg::ncc(a, inv), -1.0, 1e-12);
  EXPECT_NEAR(reg::ncc(a, b), direct_ncc(a, b), 1e-9);
  EXPECT_THROW(reg::ncc(Image16(5, 5, 1), a), Error);
}

TEST(Registration, SelfRegistrationIsIdentity) {
  const auto &c = post_case();
  const auto r = reg::optimize(c.minip, c.minip);
  EXPECT_GT(r.similarity, 0.99);
  expect_near_transform(r.transform, AffineTransform2D::identity(), 0.5, 0.02, 1.0);
  EXPECT_FALSE(r.failed);
}

TEST(Registration, RecoversKnownPerturbation) {
  const auto &c = post_case();
  const AffineTransform2D k{5, 1.05, 1.05, 20, -10};
  const auto moving = warp(c.minip, k);
  const auto r = reg::optimize(moving, c.minip);
  expect_near_transform(r.transform, inverse(k, Center::of(c.minip.pixels.shape())), 1.0, 0.03,
                        3.0);
  for (const auto &lvl : r.trace)
    for (std::size_t i = 1; i < lvl.accepted.size(); ++i)
      EXPECT_GE(lvl.accepted[i], lvl.accepted[i - 1]);
}

TEST(Registration, PreToPost) {
  const auto &post = post_case();
  const auto same = reg::register_pre_to_post(post.minip, post.minip);
  expect_near_transform(same.transform, AffineTransform2D::identity(), 0.5, 0.02, 1.0);

  const AffineTransform2D shift{0, 1, 1, 17, -12};
  const auto pre = warp(post.minip, shift);
  const auto r = reg::register_pre_to_post(pre, post.minip);
  EXPECT_NEAR(r.transform.tx, -17, 3.0);
  EXPECT_NEAR(r.transform.ty, 12, 3.0);

  synth::PhantomSpec s;
  s.seed = 7;
  s.stage = Stage::PreEvt;
  s.occlusion = Occlusion::ICA;
  const auto occluded = synth::standard_case(synth::generate(s));
  const auto bad = reg::register_pre_to_post(occluded.minip, post.minip);
  EXPECT_LT(bad.similarity, 0.2);
  EXPECT_TRUE(bad.failed);
}

TEST(Registration, BestAtlasSelection) {
  // Three atlases; the patient is atlas #2 perturbed with noise.
  std::vector<reg::AtlasEntry> lib;
  for (int i = 0; i < 3; ++i) {
    synth::PhantomSpec s;
    s.seed = 500 + static_cast<std::uint64_t>(i);
    const auto c = synth::standard_case(synth::generate(s));
    lib.push_back({"atlas_" + std::to_string(i), View::AP, c.minip, c.truth});
  }
  auto patient = lib[2].minip;
  std::mt19937 rng(5);
  std::normal_distribution<double> nd(0, 15);
  for (auto &v : patient.pixels.pixels())
    v = static_cast<std::uint16_t>(std::clamp(v + nd(rng), 0.0, 65535.0));
  reg::RegistrationOptions opt;
  opt.threads = 1;
  const auto r = reg::register_best_atlas(lib, patient, View::AP, opt);
  EXPECT_EQ(r.best.atlas_id, "atlas_2");
  ASSERT_EQ(r.runs.size(), 3u);
  for (const auto &run : r.runs)
    EXPECT_GE(r.best.similarity, run.similarity);
  EXPECT_GT(metrics::dsc(r.warped_mask.ica(), lib[2].masks.ica()), 0.97);
  EXPECT_THROW(reg::register_best_atlas(lib, patient, View::Lateral, opt), Error);
}

TEST(Registration, LibraryRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "vterr_atlas_lib";
  std::filesystem::remove_all(dir);
  const auto &c = post_case();
  std::vector<reg::AtlasEntry> lib{{"a0", View::Lateral, c.minip, c.truth}};
  reg::save_atlas_library(lib, dir);
  const auto back = reg::load_atlas_library(dir);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].id, "a0");
  EXPECT_EQ(back[0].view, View::Lateral);
  EXPECT_EQ(back[0].minip.pixels, c.minip.pixels);
  EXPECT_EQ(back[0].masks, c.truth);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "vterr/io.hpp"
#include "vterr/types.hpp"

using namespace vterr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("vterr_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DsaSequence constant_sequence(int frames, std::uint16_t v) {
  DsaSequence s;
  for (int i = 0; i < frames; ++i)
    s.frames.emplace_back(8, 8, v);
  s.view = View::AP;
  s.patient_id = "p1";
  return s;
}

} // namespace

TEST(Types, EnumNamesRoundTrip) {
  for (View v : {View::AP, View::Lateral})
    EXPECT_EQ(parse_view(to_string(v)), v);
  for (Phase p : kAllPhases)
    EXPECT_EQ(parse_phase(to_string(p)), p);
  for (Occlusion o : {Occlusion::ICA, Occlusion::M1, Occlusion::M2})
    EXPECT_EQ(parse_occlusion(to_string(o)), o);
  EXPECT_EQ(parse_view("lateral"), View::Lateral);
  EXPECT_THROW(parse_view("oblique"), Error);
}

TEST(Types, TerritoryRegionsPartitionIca) {
  TerritoryMask m(Shape{4, 1});
  m.set(1, 0, Label::MCA);
  m.set(2, 0, Label::ACA);
  EXPECT_EQ(m.ica().count(), 2u);
  EXPECT_EQ(m.mca().count(), 1u);
  EXPECT_EQ(m.aca().count(), 1u);
  EXPECT_THROW(TerritoryMask(Grid<std::uint8_t>(2, 2, 3)), Error);
}

TEST(Types, SequenceValidation) {
  auto s = constant_sequence(3, 5);
  s.phase_labels = std::vector<Phase>{Phase::Arterial, Phase::Venous};
  EXPECT_THROW(s.validate(), Error);
  s.phase_labels.reset();
  s.frames[1] = Image16(4, 4, 0);
  EXPECT_THROW(s.validate(), Error);
}

TEST(Io, SequenceRoundTrip) {
  const auto dir = scratch("seq");
  auto s = constant_sequence(3, 1234);
  s.frames[2](3, 4) = 7;
  s.phase_labels = std::vector<Phase>{Phase::NonContrast, Phase::Arterial, Phase::Capillary};
  io::save_sequence(s, dir);
  const auto r = io::load_sequence(dir);
  EXPECT_EQ(r.frame_count(), 3);
  EXPECT_EQ(r.view, View::AP);
  EXPECT_EQ(r.patient_id, "p1");
  ASSERT_TRUE(r.phase_labels);
  EXPECT_EQ(*r.phase_labels, *s.phase_labels);
  for (int i = 0; i < 3; ++i)
    EXPECT_EQ(r.frames[i], s.frames[i]);
}

TEST(Io, SequencePhaseLabelMismatch) {
  const auto dir = scratch("mismatch");
  io::save_sequence(constant_sequence(3, 9), dir);
  nlohmann::json meta;
  std::ifstream(dir / "meta.json") >> meta;
  meta["phase_labels"] = {"ARTERIAL", "VENOUS"};
  std::ofstream(dir / "meta.json") << meta.dump();
  try {
    (void)io::load_sequence(dir);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("phase label count mismatch"), std::string::npos);
  }
}

TEST(Io, SequenceErrors) {
  const auto empty = scratch("empty");
  std::ofstream(empty / "meta.json") << R"({"view":"AP","stage":"POST_EVT","occlusion":"M1","patient_id":"x"})";
  try {
    (void)io::load_sequence(empty);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("no frames found"), std::string::npos);
  }
  const auto gap = scratch("gap");
  io::save_sequence(constant_sequence(3, 9), gap);
  fs::remove(gap / "frame_0001.png");
  try {
    (void)io::load_sequence(gap);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("frame_0002.png"), std::string::npos);
  }
  const auto nometa = scratch("nometa");
  io::save_sequence(constant_sequence(1, 9), nometa);
  fs::remove(nometa / "meta.json");
  EXPECT_THROW((void)io::load_sequence(nometa), io::IoError);
}

TEST(Io, MaskRoundTrip) {
  const auto dir = scratch("mask");
  TerritoryMask zero(Shape{1024, 1024});
  io::save_mask(zero, dir / "zero.png");
  EXPECT_EQ(io::load_mask(dir / "zero.png"), zero);

  TerritoryMask checker(Shape{64, 48});
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      checker.set(x, y, (x + y) % 2 ? Label::MCA : Label::ACA);
  io::save_mask(checker, dir / "checker.png");
  EXPECT_EQ(io::load_mask(dir / "checker.png"), checker);
}

TEST(Io, MaskRejectsForeignLabels) {
  const auto dir = scratch("bad");
  Grid<std::uint8_t> g(4, 4, 0);
  g(1, 1) = 3;
  io::write_png8(dir / "bad.png", g);
  EXPECT_THROW((void)io::load_mask(dir / "bad.png"), Error);
}

TEST(Io, Png16RoundTripIsBitExact) {
  std::mt19937 rng(3);
  Image16 img(37, 21);
  for (auto &v : img.pixels())
    v = static_cast<std::uint16_t>(rng());
  EXPECT_EQ(io::decode_png_gray16(io::encode_png16(img)), img);
}

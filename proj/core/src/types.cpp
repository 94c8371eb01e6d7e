#include "vterr/types.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace vterr {

namespace {

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '-' || c == ' ')
      c = '_';
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

[[noreturn]] void bad(std::string_view kind, std::string_view s) {
  throw Error("unknown " + std::string(kind) + " '" + std::string(s) + "'");
}

} // namespace

std::string_view to_string(View v) {
  return v == View::AP ? "AP" : "LATERAL";
}
std::string_view to_string(Stage s) {
  return s == Stage::PreEvt ? "PRE_EVT" : "POST_EVT";
}
std::string_view to_string(Occlusion o) {
  switch (o) {
  case Occlusion::ICA:
    return "ICA";
  case Occlusion::M1:
    return "M1";
  case Occlusion::M2:
    return "M2";
  }
  return "?";
}
std::string_view to_string(Phase p) {
  switch (p) {
  case Phase::NonContrast:
    return "NON_CONTRAST";
  case Phase::Arterial:
    return "ARTERIAL";
  case Phase::Capillary:
    return "CAPILLARY";
  case Phase::Venous:
    return "VENOUS";
  }
  return "?";
}
std::string_view to_string(PhaseScope p) {
  switch (p) {
  case PhaseScope::Full:
    return "FULL";
  case PhaseScope::NonContrast:
    return "NON_CONTRAST";
  case PhaseScope::Arterial:
    return "ARTERIAL";
  case PhaseScope::Capillary:
    return "CAPILLARY";
  case PhaseScope::Venous:
    return "VENOUS";
  }
  return "?";
}
std::string_view to_string(Method m) {
  return m == Method::Model ? "MODEL" : "ATLAS";
}
std::string_view to_string(Territory t) {
  return t == Territory::ICA ? "ICA" : "MCA";
}

View parse_view(std::string_view s) {
  const auto n = normalize(s);
  if (n == "AP")
    return View::AP;
  if (n == "LATERAL" || n == "LAT")
    return View::Lateral;
  bad("view", s);
}
Stage parse_stage(std::string_view s) {
  const auto n = normalize(s);
  if (n == "PRE_EVT" || n == "PRE")
    return Stage::PreEvt;
  if (n == "POST_EVT" || n == "POST")
    return Stage::PostEvt;
  bad("stage", s);
}
Occlusion parse_occlusion(std::string_view s) {
  const auto n = normalize(s);
  if (n == "ICA")
    return Occlusion::ICA;
  if (n == "M1")
    return Occlusion::M1;
  if (n == "M2")
    return Occlusion::M2;
  bad("occlusion", s);
}
Phase parse_phase(std::string_view s) {
  const auto n = normalize(s);
  if (n == "NON_CONTRAST" || n == "NONCONTRAST")
    return Phase::NonContrast;
  if (n == "ARTERIAL")
    return Phase::Arterial;
  if (n == "CAPILLARY")
    return Phase::Capillary;
  if (n == "VENOUS")
    return Phase::Venous;
  bad("phase", s);
}
PhaseScope parse_phase_scope(std::string_view s) {
  if (normalize(s) == "FULL")
    return PhaseScope::Full;
  return scope_of(parse_phase(s));
}
Method parse_method(std::string_view s) {
  const auto n = normalize(s);
  if (n == "MODEL")
    return Method::Model;
  if (n == "ATLAS")
    return Method::Atlas;
  bad("method", s);
}

PhaseScope scope_of(Phase p) {
  switch (p) {
  case Phase::NonContrast:
    return PhaseScope::NonContrast;
  case Phase::Arterial:
    return PhaseScope::Arterial;
  case Phase::Capillary:
    return PhaseScope::Capillary;
  case Phase::Venous:
    return PhaseScope::Venous;
  }
  return PhaseScope::Full;
}

void DsaSequence::validate() const {
  if (frames.empty())
    throw Error("no frames found");
  const Shape s = frames.front().shape();
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].shape() != s)
      throw ShapeMismatch("frame " + std::to_string(i) + " has shape " +
                          to_string(frames[i].shape()) + ", expected " +
                          to_string(s));
  if (phase_labels && phase_labels->size() != frames.size())
    throw Error("phase label count mismatch: " +
                std::to_string(phase_labels->size()) + " labels for " +
                std::to_string(frames.size()) + " frames");
}

BinaryMask::BinaryMask(Grid<std::uint8_t> g) : Grid(std::move(g)) {
  for (auto &v : pixels())
    v = v ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  const auto p = pixels();
  return static_cast<std::size_t>(
      std::count_if(p.begin(), p.end(), [](std::uint8_t v) { return v != 0; }));
}

TerritoryMask::TerritoryMask(Grid<std::uint8_t> labels)
    : labels_(std::move(labels)) {
  for (int y = 0; y < labels_.height(); ++y)
    for (int x = 0; x < labels_.width(); ++x)
      if (labels_(x, y) > 2)
        throw Error("label value " + std::to_string(labels_(x, y)) +
                    " outside {0,1,2} at (" + std::to_string(x) + "," +
                    std::to_string(y) + ")");
}

BinaryMask TerritoryMask::region(Label l) const {
  BinaryMask m(labels_.shape());
  const auto src = labels_.pixels();
  auto dst = m.pixels();
  const auto want = static_cast<std::uint8_t>(l);
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] == want ? 1 : 0;
  return m;
}

BinaryMask TerritoryMask::ica() const {
  BinaryMask m(labels_.shape());
  const auto src = labels_.pixels();
  auto dst = m.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] != 0 ? 1 : 0;
  return m;
}

} // namespace vterr

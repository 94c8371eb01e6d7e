#pragma once
// Domain model: acquisitions, projections and territory label maps.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vterr/grid.hpp"

namespace vterr {

using Image16 = Grid<std::uint16_t>;
using ImageF = Grid<float>;

inline constexpr int kStandardSize = 1024;

enum class View { AP, Lateral };
enum class Stage { PreEvt, PostEvt };
enum class Occlusion { ICA, M1, M2 };
enum class Phase { NonContrast, Arterial, Capillary, Venous };
enum class PhaseScope { Full, NonContrast, Arterial, Capillary, Venous };
enum class Method { Model, Atlas };
enum class Territory { ICA, MCA };

inline constexpr Phase kAllPhases[] = {Phase::NonContrast, Phase::Arterial,
                                       Phase::Capillary, Phase::Venous};

// Canonical wire names (meta.json, manifests, JSON reports, CLI).
std::string_view to_string(View v);
std::string_view to_string(Stage s);
std::string_view to_string(Occlusion o);
std::string_view to_string(Phase p);
std::string_view to_string(PhaseScope p);
std::string_view to_string(Method m);
std::string_view to_string(Territory t);

// Parsers accept the canonical name case-insensitively plus the short CLI
// spellings ("pre", "post", "ap", "lateral", "non_contrast", ...).
View parse_view(std::string_view s);
Stage parse_stage(std::string_view s);
Occlusion parse_occlusion(std::string_view s);
Phase parse_phase(std::string_view s);
PhaseScope parse_phase_scope(std::string_view s);
Method parse_method(std::string_view s);

PhaseScope scope_of(Phase p);

/// 2D+time acquisition. Frames share one shape; phase labels, when present,
/// have one entry per frame.
struct DsaSequence {
  std::vector<Image16> frames;
  View view = View::AP;
  Stage stage = Stage::PostEvt;
  Occlusion occlusion = Occlusion::M1;
  std::string patient_id;
  std::optional<std::vector<Phase>> phase_labels;

  [[nodiscard]] int frame_count() const {
    return static_cast<int>(frames.size());
  }
  [[nodiscard]] Shape shape() const {
    return frames.empty() ? Shape{} : frames.front().shape();
  }
  /// Throws vterr::Error when an invariant is violated.
  void validate() const;
};

/// Per-pixel minimum over a frame subset. phase_scope is empty for an ad-hoc
/// subset that is neither the full sequence nor a single annotated phase.
struct MinIpImage {
  Image16 pixels;
  std::optional<PhaseScope> phase_scope;
  std::vector<int> source_frames;
};

/// Boolean region, stored as 0/1 bytes.
class BinaryMask : public Grid<std::uint8_t> {
public:
  using Grid::Grid;
  BinaryMask() = default;
  explicit BinaryMask(Grid<std::uint8_t> g);

  [[nodiscard]] bool at(int x, int y) const { return (*this)(x, y) != 0; }
  void set(int x, int y, bool v = true) { (*this)(x, y) = v ? 1 : 0; }
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool none() const { return count() == 0; }
};

enum class Label : std::uint8_t { Background = 0, MCA = 1, ACA = 2 };

/// Label map over {background, MCA, ACA}. The ICA territory is the union of
/// the two foreground labels.
class TerritoryMask {
public:
  TerritoryMask() = default;
  explicit TerritoryMask(Shape s) : labels_(s, 0) {}
  /// Rejects any value outside {0,1,2}.
  explicit TerritoryMask(Grid<std::uint8_t> labels);

  [[nodiscard]] const Grid<std::uint8_t> &labels() const { return labels_; }
  [[nodiscard]] Shape shape() const { return labels_.shape(); }
  [[nodiscard]] int width() const { return labels_.width(); }
  [[nodiscard]] int height() const { return labels_.height(); }

  [[nodiscard]] Label at(int x, int y) const {
    return static_cast<Label>(labels_(x, y));
  }
  void set(int x, int y, Label l) {
    labels_(x, y) = static_cast<std::uint8_t>(l);
  }

  [[nodiscard]] BinaryMask region(Label l) const;
  [[nodiscard]] BinaryMask mca() const { return region(Label::MCA); }
  [[nodiscard]] BinaryMask aca() const { return region(Label::ACA); }
  [[nodiscard]] BinaryMask ica() const;
  [[nodiscard]] BinaryMask territory(Territory t) const {
    return t == Territory::ICA ? ica() : mca();
  }

  bool operator==(const TerritoryMask &) const = default;

private:
  Grid<std::uint8_t> labels_;
};

/// One acquisition inside a cohort: file references plus stratification keys.
struct CaseRecord {
  std::string case_id;
  std::string patient_id;
  View view = View::AP;
  Stage stage = Stage::PostEvt;
  Occlusion occlusion = Occlusion::M1;
  std::string sequence_dir;
  std::string minip;
  std::string reference;
  std::map<Method, std::string> predictions;
  std::map<Phase, std::string> phase_minips;
  std::map<Phase, std::string> phase_predictions;
};

} // namespace vterr

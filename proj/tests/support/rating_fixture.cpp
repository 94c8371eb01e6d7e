#include "rating_fixture.hpp"

#include "vterr/io.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace vterr;

fs::path fresh_dir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("vterr_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path rating_cohort(const fs::path &dir, int cases, int per_patient) {
  report::CohortManifest m;
  Image16 minip(Shape{32, 32}, 3000);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x)
      minip(x, y) = static_cast<std::uint16_t>(1000 + 20 * x);
  io::write_png16(dir / "minip.png", minip);
  TerritoryMask mask(minip.shape());
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x)
      mask.set(x, y, x < 16 ? Label::MCA : Label::ACA);
  io::save_mask(mask, dir / "mask.png");
  for (int i = 0; i < cases; ++i) {
    CaseRecord c;
    char id[16];
    std::snprintf(id, sizeof id, "c%03d", i);
    c.case_id = id;
    c.patient_id = "p" + std::to_string(i / per_patient);
    c.view = i % 2 ? View::Lateral : View::AP;
    c.minip = "minip.png";
    c.reference = "mask.png";
    c.predictions[Method::Model] = "mask.png";
    c.predictions[Method::Atlas] = "mask.png";
    m.cases.push_back(c);
  }
  report::save_manifest(m, dir / "manifest.json");
  return dir / "manifest.json";
}

} // namespace fixture

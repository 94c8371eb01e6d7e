#pragma once
// Small on-disk cohorts for rating tests.
#include <filesystem>
#include <string>

#include "vterr/manifest.hpp"

namespace fixture {

/// `cases` acquisitions with MODEL and ATLAS masks and a MinIP, written under
/// `dir`; `per_patient` acquisitions share a patient id. Returns the manifest
/// path.
std::filesystem::path rating_cohort(const std::filesystem::path &dir, int cases,
                                    int per_patient = 1);

std::filesystem::path fresh_dir(const std::string &name);

} // namespace fixture

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string_view>

#include "fusionbiopsy/core.hpp"

namespace fusionbiopsy::fixture {

/// Synthetic study: each breast image is an elliptical tissue region with
/// a lesion blob whose contrast encodes the class. For channel ch the blob
/// amplitude is base + s * margin[ch] * unit + jitter * unit * N(0,1), with
/// s = +1 for malignant and -1 for benign, so margin / jitter controls how
/// separable that channel is.
struct FixtureSpec {
  std::size_t patients = 100;
  double malignant_fraction = 0.5;
  /// Share of patients imaged on both sides (both breasts share the label).
  double bilateral_fraction = 0.0;
  /// Share of records without CESM images.
  double missing_cesm_fraction = 0.0;
  std::map<Channel, double> margin{{{Modality::F, View::CC}, 0.5},
                                   {{Modality::F, View::MLO}, 0.5},
                                   {{Modality::C, View::CC}, 1.5},
                                   {{Modality::C, View::MLO}, 1.5}};
  double jitter = 1.0;
  double unit = 12.0;         // gray levels per margin unit
  double pixel_noise = 3.0;   // gray levels
  std::size_t width = 80;
  std::size_t height = 64;
  std::uint64_t seed = 1;
  /// Preprocessing side written into the generated config.
  std::size_t target_size = 64;

  void validate() const;
};

FixtureSpec parse_fixture_spec(std::string_view json_text);

/// Writes manifest.json, images/*.pgm and config.json (a ready-to-run
/// experiment config) under `out_dir`. Deterministic in the spec.
DatasetManifest write_fixture(const FixtureSpec& spec, const std::filesystem::path& out_dir);

/// Patient-level labels: round(patients * malignant_fraction) malignant.
std::size_t malignant_patients(const FixtureSpec& spec);

}  // namespace fusionbiopsy::fixture

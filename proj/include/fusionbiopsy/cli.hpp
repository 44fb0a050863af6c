#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fusionbiopsy/fixture.hpp"
#include "fusionbiopsy/harness.hpp"

namespace fusionbiopsy::cli {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> folds;
};

/// Loads the config, applies overrides, runs the experiment and writes
/// report.json, tables/ and plots/ under `out_dir`.
harness::ExperimentReport cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                                  const RunOverrides& overrides = {});

/// Same as cmd_run with the robustness sweep forced on (default sweep when
/// the config has none) and the F / C / FplusC baselines included.
harness::ExperimentReport cmd_robustness(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                                         const RunOverrides& overrides = {});

/// Fusion replay over an external score table: weights from each fold's
/// validation rows, no images read. Runs F, C and FplusC, plus Chat and
/// FplusChat when a synthetic table is given.
harness::ExperimentReport cmd_evaluate(const std::filesystem::path& scores, const std::filesystem::path& manifest,
                                       const std::filesystem::path& split_spec, const std::filesystem::path& out_dir,
                                       const std::optional<std::filesystem::path>& synthetic_scores = {});

/// Preprocesses every FFDM image, writes synthetic CESM as 16-bit PGM named
/// {patient_id}_{laterality}_{view}.pgm (the External generator's default
/// pattern) plus quality.csv against real CESM where present. Generators
/// and preprocessing come from `config` when given (identity otherwise).
void cmd_generate(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& config = {});

fixture::FixtureSpec cmd_fixture(const std::filesystem::path& out_dir, const fixture::FixtureSpec& spec);

/// Command-line entry point. Errors print {"error": {...}} to `err` and
/// map to exit codes 2 (config), 3 (data), 4 (internal).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Machine-readable error document.
std::string error_json(const std::string& code, const std::string& category, const std::string& message);

}  // namespace fusionbiopsy::cli

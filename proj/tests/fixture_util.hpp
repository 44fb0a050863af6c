#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>

#include "fusionbiopsy/fixture.hpp"
#include "test_util.hpp"

namespace testutil {

/// Writes a fixture dataset and returns the path of its config.json after
/// applying `edit` to the parsed config.
inline std::filesystem::path make_fixture(const std::filesystem::path& dir, fusionbiopsy::fixture::FixtureSpec spec,
                                          const std::function<void(nlohmann::json&)>& edit = {}) {
  fusionbiopsy::fixture::write_fixture(spec, dir);
  const auto cfg_path = dir / "config.json";
  if (edit) {
    auto cfg = nlohmann::json::parse(slurp(cfg_path));
    edit(cfg);
    spit(cfg_path, cfg.dump(2));
  }
  return cfg_path;
}

/// A small, fast fixture: 32-pixel images, short training.
inline fusionbiopsy::fixture::FixtureSpec small_spec(std::size_t patients, std::uint64_t seed = 1) {
  fusionbiopsy::fixture::FixtureSpec spec;
  spec.patients = patients;
  spec.seed = seed;
  spec.width = 40;
  spec.height = 32;
  spec.target_size = 32;
  return spec;
}

inline void shorten_training(nlohmann::json& cfg) {
  cfg["scorers"]["hyper"]["max_epochs"] = 40;
  cfg["scorers"]["hyper"]["patience"] = 10;
  cfg["scorers"]["hyper"]["warmup"] = 5;
}

}  // namespace testutil

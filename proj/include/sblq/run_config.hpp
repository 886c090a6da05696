#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sblq/learner.hpp"
#include "sblq/synth.hpp"

namespace sblq {

// Fully resolved parameters of one CLI invocation.
struct RunConfig {
  std::string preset;  // "", "a1-performance" or "a2-interpretability"
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out = "out";

  EnvSpec env;
  int n_trajectories = 1000;
  double train_fraction = 0.5;

  Method method = Method::tikhonov;
  std::vector<Method> compare_methods;
  int compare_seeds = 5;

  // Unset entries fall back to AdaptiveConfig::defaults of the filter.
  AdaptiveConfig adaptive;
  std::optional<double> q0_override;
  std::optional<double> c_ada_override;
  LassoSettings lasso;

  int episodes = 1000;
  double clip_pct = 0.05;
  std::vector<int> topk;
  bool group_blocks = false;  // aggregate user/video/action blocks in reports

  std::filesystem::path dataset;  // prefix: <p>.header.json + <p>.jsonl
  std::vector<std::filesystem::path> models;
  std::filesystem::path env_path;

  // Adaptive constants for a spectral method with overrides applied.
  AdaptiveConfig adaptive_for(Method method) const;

  // The resolved configuration as a JSON document (round-trips through parse_config).
  nlohmann::json document;
};

using Override = std::pair<std::string, std::string>;  // dotted key, value text

// Defaults < preset < file < overrides. Unknown keys, wrong types and
// overrides of preset-locked fields raise ConfigError naming the field.
// When no seed is given anywhere, SBLQ_SEED is consulted.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<Override>& overrides = {});

RunConfig parse_config_json(const nlohmann::json& document, const std::vector<Override>& overrides = {});

// JSON Schema (draft 2020-12) describing every accepted key.
nlohmann::json run_config_schema();

}  // namespace sblq

#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sblq/run_config.hpp"

namespace sblq {

// One (method, seed) cell of the compare grid.
struct CompareRow {
  Method method = Method::ls;
  std::uint64_t seed = 0;
  double parameter_gap = 0.0;
  double policy_gap = 0.0;
  double cumulative_reward = 0.0;
  double seconds = 0.0;  // wall-clock training time
};

// Seeds cfg.seed .. cfg.seed + compare_seeds - 1. Each seed builds its own
// environment, generates cfg.n_trajectories, trains every method on the train
// split and evaluates on the test split. Rows are ordered by method then seed
// regardless of cfg.jobs.
std::vector<CompareRow> compare_grid(const RunConfig& cfg);

// Executes gen, train, eval, report, compare or schema, writing into cfg.out.
// Returns the files written. On failure every file written so far is removed
// and the exception is rethrown.
std::vector<std::filesystem::path> run(std::string_view command, const RunConfig& cfg);

// 2 config, 3 data, 4 numeric, 1 anything else.
int exit_code_for(const std::exception& error);

// {"error": {"command", "type", "exit_code", "message"}}.
nlohmann::json error_json(std::string_view command, const std::exception& error);

}  // namespace sblq

// sblq: dataset generation, training, evaluation and reporting.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sblq/commands.hpp"
#include "sblq/errors.hpp"
#include "sblq/run_config.hpp"

namespace {

sblq::Override split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw sblq::ConfigError("--set expects key=value, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive spectral linear Q-learning workbench"};
  app.require_subcommand(1, 1);

  std::string config_path, preset, out, dataset, env;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::vector<std::string> models, sets;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "Generate a synthetic environment plus train/test datasets"},
      {"train", "Fit per-stage parameters on a dataset"},
      {"eval", "Compute metrics for one or more models"},
      {"report", "Feature contributions, clipped weights and top-k curves"},
      {"compare", "Method x seed grid on freshly generated data"},
      {"schema", "Write the configuration JSON schema"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "a1-performance or a2-interpretability");
    sub->add_option("--seed", seed, "Master seed (falls back to SBLQ_SEED)");
    sub->add_option("--jobs", jobs, "Concurrent tasks")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--dataset", dataset, "Dataset prefix");
    sub->add_option("--model", models, "Model file (repeatable)");
    sub->add_option("--env", env, "Environment file");
    sub->add_option("--set", sets, "Override a configuration key (key=value, repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    // Dedicated flags are applied after --set so they win.
    std::vector<sblq::Override> overrides;
    for (const auto& s : sets) overrides.push_back(split_assignment(s));
    if (!preset.empty()) overrides.emplace_back("preset", preset);
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (jobs) overrides.emplace_back("jobs", std::to_string(*jobs));
    if (!out.empty()) overrides.emplace_back("out", nlohmann::json(out).dump());
    if (!dataset.empty()) overrides.emplace_back("paths.dataset", nlohmann::json(dataset).dump());
    if (!env.empty()) overrides.emplace_back("paths.env", nlohmann::json(env).dump());
    if (!models.empty()) overrides.emplace_back("paths.models", nlohmann::json(models).dump());

    std::optional<std::filesystem::path> file;
    if (!config_path.empty()) file = config_path;
    const sblq::RunConfig cfg = sblq::parse_config(file, overrides);
    for (const auto& p : sblq::run(command, cfg)) std::cout << p.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << sblq::error_json(command, e).dump() << '\n';
    return sblq::exit_code_for(e);
  }
}

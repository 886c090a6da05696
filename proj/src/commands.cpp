#include "sblq/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <typeinfo>

#include "sblq/baselines.hpp"
#include "sblq/dataset.hpp"
#include "sblq/errors.hpp"
#include "sblq/interpret.hpp"
#include "sblq/io.hpp"
#include "sblq/model_io.hpp"
#include "sblq/policy.hpp"
#include "sblq/synth.hpp"

namespace sblq {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stream ids for mix_seed.
constexpr std::uint64_t kGenStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kRolloutStream = 3;

// Tracks written files so a failed command can remove them.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, const std::string& content) {
    const fs::path p = path(name);
    io::write_text_atomic(p, content);
    written_.push_back(p);
  }
  void json_file(const std::string& name, const json& doc) { text(name, doc.dump(1) + "\n"); }
  void add(const fs::path& p) { written_.push_back(p); }

  const std::vector<fs::path>& written() const { return written_; }
  void remove_all() const {
    std::error_code ec;
    for (const auto& p : written_) {
      fs::remove(p, ec);
      fs::path tmp = p;
      tmp += ".tmp";
      fs::remove(tmp, ec);
    }
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

void require_path(const fs::path& p, const std::string& key, const std::string& command) {
  if (p.empty()) throw ConfigError("field '" + key + "' is required by " + command);
}

BatchDataset load_prefix(const fs::path& prefix) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  return load_dataset(paths.header, paths.trajectories);
}

ModelBundle train_with(const RunConfig& cfg, const BatchDataset& data, Method method,
                       const std::vector<bool>& mask, std::vector<StageFitReport>* reports = nullptr) {
  TrainOptions options;
  options.feature_mask = mask;
  options.seed = cfg.seed;
  TrainResult result = train_method(data, method, cfg.adaptive_for(method), cfg.lasso, options);
  if (reports != nullptr) *reports = std::move(result.reports);
  return std::move(result.model);
}

void cmd_gen(const RunConfig& cfg, Outputs& out) {
  const SyntheticEnv env = make_env(cfg.env, cfg.seed);
  const Generated gen = generate_trajectories(env, cfg.n_trajectories, BehaviorPolicy::uniform_random,
                                              mix_seed(cfg.seed, kGenStream));
  const auto [train, test] = split(gen.dataset, cfg.train_fraction, mix_seed(cfg.seed, kSplitStream));
  for (const auto& [name, part] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    const auto paths = DatasetPaths::from_prefix(out.path(name));
    out.add(paths.header);
    out.add(paths.trajectories);
    save_dataset(*part, paths.header, paths.trajectories);
  }
  out.add(out.path("env.json"));
  save_env(env, out.path("env.json"));
  out.json_file("ground_truth.json", ground_truth_json(env.theta_star()));
}

void cmd_train(const RunConfig& cfg, Outputs& out) {
  require_path(cfg.dataset, "paths.dataset", "train");
  const BatchDataset data = load_prefix(cfg.dataset);
  std::vector<StageFitReport> reports;
  const ModelBundle model = train_with(cfg, data, cfg.method, {}, &reports);
  out.add(out.path("model.json"));
  save_model(model, out.path("model.json"));
  out.json_file("stage_reports.json", to_json(reports));
}

std::vector<ModelBundle> load_models(const RunConfig& cfg, const std::string& command) {
  if (cfg.models.empty()) throw ConfigError("field 'paths.models' is required by " + command);
  std::vector<ModelBundle> models;
  for (const auto& p : cfg.models) models.push_back(load_model(p));
  return models;
}

void cmd_eval(const RunConfig& cfg, Outputs& out) {
  require_path(cfg.dataset, "paths.dataset", "eval");
  const auto models = load_models(cfg, "eval");
  const BatchDataset data = load_prefix(cfg.dataset);
  std::optional<SyntheticEnv> env;
  if (!cfg.env_path.empty()) env = load_env(cfg.env_path);

  json reports = json::array();
  std::string csv;
  for (const auto& model : models) {
    const MetricsReport report = evaluate(model, data, env ? &*env : nullptr, cfg.episodes,
                                          mix_seed(cfg.seed, kRolloutStream));
    reports.push_back(to_json(report));
    if (csv.empty()) csv = csv_header(report) + "\n";
    csv += csv_row(report) + "\n";
  }
  out.json_file("metrics.json", {{"models", reports}});
  out.text("metrics.csv", csv);
}

FeatureGroups block_groups(const RunConfig& cfg, const ModelBundle& model,
                           const std::optional<SyntheticEnv>& env, const BatchDataset* data) {
  FeatureGroups g;
  std::vector<std::pair<std::string, int>> blocks;
  if (env) {
    const EnvSpec& s = env->spec();
    blocks = {{"user", s.d_user}, {"video", s.d_video}, {"action", s.d_action}};
  } else if (data != nullptr) {
    blocks = {{"state", data->state_dim()}, {"action", data->action_dim()}};
  } else {
    throw ConfigError("report.groups = \"blocks\" needs paths.env or paths.dataset");
  }
  (void)cfg;
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
    g.names.push_back(blocks[static_cast<std::size_t>(b)].first);
    for (int j = 0; j < blocks[static_cast<std::size_t>(b)].second; ++j) g.group_of.push_back(b);
  }
  g.validate(model.feature_dim);
  return g;
}

void cmd_report(const RunConfig& cfg, Outputs& out) {
  const auto models = load_models(cfg, "report");
  std::optional<SyntheticEnv> env;
  if (!cfg.env_path.empty()) env = load_env(cfg.env_path);
  std::optional<BatchDataset> data;
  if (!cfg.dataset.empty()) data = load_prefix(cfg.dataset);

  std::vector<WeightEntry> pooled;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const ModelBundle& model = models[i];
    const std::string method(to_string(model.method));
    const std::string tag = std::to_string(i + 1) + "_" + method;

    std::optional<FeatureGroups> groups;
    if (cfg.group_blocks) groups = block_groups(cfg, model, env, data ? &*data : nullptr);
    const FeatureGroups* gp = groups ? &*groups : nullptr;
    const ContributionReport contrib = contribution_proportions(model, gp);
    json doc = to_json(contrib);
    doc["method"] = method;
    doc["model"] = cfg.models[i].string();
    out.json_file("contributions_" + tag + ".json", doc);
    out.text("contributions_" + tag + ".csv", contributions_csv(contrib));

    const auto entries = weight_entries(model, method);
    pooled.insert(pooled.end(), entries.begin(), entries.end());

    if (!cfg.topk.empty()) {
      if (!data) throw ConfigError("report.topk needs paths.dataset");
      const BatchDataset& train_data = *data;
      MaskedTrainer trainer = [&](const std::vector<bool>& keep) {
        return train_with(cfg, train_data, model.method, keep);
      };
      ModelScorer scorer = [&](const ModelBundle& m) {
        if (env) {
          const GreedyPolicy policy(m, env->action_table(), env->normalize_features());
          return rollout_reward(policy, *env, cfg.episodes, mix_seed(cfg.seed, kRolloutStream));
        }
        return direct_value_estimate(m, train_data);
      };
      const auto curve = topk_feature_rewards(contrib, model.feature_dim, gp, cfg.topk, trainer, scorer);
      out.text("topk_" + tag + ".csv", topk_csv(curve));
    }
  }

  const auto flags = clipped_weights(pooled, cfg.clip_pct);
  std::ostringstream clipped;
  clipped << "method,feature,stage,value,clipped\n";
  std::vector<std::string> order;
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const WeightEntry& e = pooled[i];
    if (!counts.count(e.method)) order.push_back(e.method);
    counts[e.method] += flags[i] ? 1 : 0;
    clipped << e.method << ',' << e.feature << ',' << e.stage << ',' << io::format_real(e.value) << ','
            << (flags[i] ? 1 : 0) << '\n';
  }
  out.text("clipped.csv", clipped.str());
  std::ostringstream summary;
  summary << "method,clipped_count\n";
  for (const auto& m : order) summary << m << ',' << counts[m] << '\n';
  out.text("clipped_counts.csv", summary.str());
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

void cmd_compare(const RunConfig& cfg, Outputs& out) {
  const auto rows = compare_grid(cfg);
  std::ostringstream table;
  table << "method,seed,parameter_gap,policy_gap,cumulative_reward\n";
  std::ostringstream timing;
  timing << "method,seed,seconds\n";
  for (const auto& r : rows) {
    table << to_string(r.method) << ',' << r.seed << ',' << io::format_real(r.parameter_gap) << ','
          << io::format_real(r.policy_gap) << ',' << io::format_real(r.cumulative_reward) << '\n';
    timing << to_string(r.method) << ',' << r.seed << ',' << io::format_real(r.seconds) << '\n';
  }
  for (const char* which : {"mean", "sd"}) {
    for (Method m : cfg.compare_methods) {
      std::vector<double> pg, qg, rw;
      for (const auto& r : rows) {
        if (r.method != m) continue;
        pg.push_back(r.parameter_gap);
        qg.push_back(r.policy_gap);
        rw.push_back(r.cumulative_reward);
      }
      const bool mean = std::string(which) == "mean";
      auto pick = [&](const std::vector<double>& v) {
        const Stats s = stats(v);
        return io::format_real(mean ? s.mean : s.sd);
      };
      table << to_string(m) << ',' << which << ',' << pick(pg) << ',' << pick(qg) << ',' << pick(rw) << '\n';
    }
  }
  out.text("compare.csv", table.str());
  out.text("timing.csv", timing.str());
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const IndexError*>(&e)) return "index";
  if (dynamic_cast<const EmptyInputError*>(&e)) return "empty_input";
  if (dynamic_cast<const SymmetryError*>(&e)) return "symmetry";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const DegenerateError*>(&e)) return "degenerate";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

}  // namespace

std::vector<CompareRow> compare_grid(const RunConfig& cfg) {
  const int S = cfg.compare_seeds;
  const auto M = static_cast<int>(cfg.compare_methods.size());

  struct SeedData {
    std::optional<SyntheticEnv> env;
    std::optional<BatchDataset> train;
    std::optional<BatchDataset> test;
  };
  std::vector<SeedData> seeds(static_cast<std::size_t>(S));
  std::vector<CompareRow> rows(static_cast<std::size_t>(S * M));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(S * M));

  // Stage 1: one environment and dataset per seed. Stage 2: one task per cell.
  auto run_tasks = [&](int count, const std::function<void(int)>& task) {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    };
    const int n_threads = std::max(1, std::min(cfg.jobs, count));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  };

  run_tasks(S, [&](int s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    SeedData& sd = seeds[static_cast<std::size_t>(s)];
    sd.env = make_env(cfg.env, seed);
    const Generated gen = generate_trajectories(*sd.env, cfg.n_trajectories, BehaviorPolicy::uniform_random,
                                                mix_seed(seed, kGenStream));
    auto [train, test] = split(gen.dataset, cfg.train_fraction, mix_seed(seed, kSplitStream));
    sd.train.emplace(std::move(train));
    sd.test.emplace(std::move(test));
  });

  run_tasks(S * M, [&](int cell) {
    const int m = cell / S;
    const int s = cell % S;
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    const SeedData& sd = seeds[static_cast<std::size_t>(s)];
    const Method method = cfg.compare_methods[static_cast<std::size_t>(m)];
    RunConfig local = cfg;
    local.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    const ModelBundle model = train_with(local, *sd.train, method, {});
    const auto stop = std::chrono::steady_clock::now();
    const MetricsReport report = evaluate(model, *sd.test, &*sd.env, cfg.episodes, mix_seed(seed, kRolloutStream));
    CompareRow& row = rows[static_cast<std::size_t>(cell)];
    row.method = method;
    row.seed = seed;
    row.parameter_gap = report.parameter_gap;
    row.policy_gap = report.policy_gap;
    row.cumulative_reward = report.cumulative_reward;
    row.seconds = std::chrono::duration<double>(stop - start).count();
  });
  return rows;
}

std::vector<fs::path> run(std::string_view command, const RunConfig& cfg) {
  Outputs out(cfg.out);
  try {
    if (command == "gen") {
      cmd_gen(cfg, out);
    } else if (command == "train") {
      cmd_train(cfg, out);
    } else if (command == "eval") {
      cmd_eval(cfg, out);
    } else if (command == "report") {
      cmd_report(cfg, out);
    } else if (command == "compare") {
      cmd_compare(cfg, out);
    } else if (command == "schema") {
      out.json_file("config.schema.json", run_config_schema());
      return out.written();
    } else {
      throw ConfigError("unknown command '" + std::string(command) + "'");
    }
    out.json_file("run_config.json", cfg.document);
  } catch (...) {
    out.remove_all();
    throw;
  }
  return out.written();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 2;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const IndexError*>(&e) ||
      dynamic_cast<const EmptyInputError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const SymmetryError*>(&e) ||
      dynamic_cast<const DegenerateError*>(&e)) {
    return 4;
  }
  return 1;
}

json error_json(std::string_view command, const std::exception& e) {
  return {{"error",
           {{"command", std::string(command)},
            {"type", error_type(e)},
            {"exit_code", exit_code_for(e)},
            {"message", e.what()}}}};
}

}  // namespace sblq

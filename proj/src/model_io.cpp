#include "sblq/model_io.hpp"

#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"

namespace sblq {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("model file: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("model file: field '") + name + "' has the wrong type");
  }
}

}  // namespace

json to_json(const AdaptiveConfig& cfg) {
  return {{"q", cfg.q},
          {"q0", cfg.q0},
          {"budget", cfg.budget},
          {"fixed_budget", cfg.fixed_budget},
          {"c_ada", cfg.c_ada},
          {"delta", cfg.delta},
          {"c_x", cfg.c_x},
          {"reward_bound", cfg.reward_bound},
          {"b0", cfg.b0},
          {"c0", cfg.c0},
          {"gamma0", cfg.gamma0},
          {"c_tilde", cfg.c_tilde},
          {"c0_effdim", cfg.c0_effdim},
          {"theta_norm_hint", cfg.theta_norm_hint}};
}

AdaptiveConfig adaptive_config_from_json(const json& j) {
  AdaptiveConfig cfg;
  cfg.q = field<double>(j, "q");
  cfg.q0 = field<double>(j, "q0");
  cfg.budget = field<int>(j, "budget");
  cfg.fixed_budget = field<bool>(j, "fixed_budget");
  cfg.c_ada = field<double>(j, "c_ada");
  cfg.delta = field<double>(j, "delta");
  cfg.c_x = field<double>(j, "c_x");
  cfg.reward_bound = field<double>(j, "reward_bound");
  cfg.b0 = field<double>(j, "b0");
  cfg.c0 = field<double>(j, "c0");
  cfg.gamma0 = field<double>(j, "gamma0");
  cfg.c_tilde = field<double>(j, "c_tilde");
  cfg.c0_effdim = field<double>(j, "c0_effdim");
  cfg.theta_norm_hint = field<double>(j, "theta_norm_hint");
  return cfg;
}

json to_json(const ModelBundle& model) {
  json stages = json::array();
  for (const StageModel& s : model.stages) {
    stages.push_back({{"t", s.t}, {"lambda", s.lambda}, {"k", s.k}, {"theta", io::to_json(s.theta)}});
  }
  json config = to_json(model.config);
  config["lasso"] = {{"grid", model.lasso.grid},
                     {"validation_fraction", model.lasso.validation_fraction},
                     {"max_iters", model.lasso.max_iters},
                     {"tol", model.lasso.tol}};
  json out = {{"version", model.format_version},
              {"horizon", model.horizon},
              {"feature_dim", model.feature_dim},
              {"filter", std::string(to_string(model.method))},
              {"stages", std::move(stages)},
              {"config", std::move(config)},
              {"seed", model.seed}};
  if (!model.feature_mask.empty()) {
    std::vector<int> mask(model.feature_mask.begin(), model.feature_mask.end());
    out["feature_mask"] = mask;
  }
  return out;
}

ModelBundle model_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model file must hold a JSON object");
  ModelBundle model;
  model.format_version = field<int>(j, "version");
  if (model.format_version != ModelBundle::kFormatVersion) {
    throw ParseError("unsupported model version " + std::to_string(model.format_version));
  }
  model.horizon = field<int>(j, "horizon");
  model.feature_dim = field<int>(j, "feature_dim");
  try {
    model.method = parse_method(field<std::string>(j, "filter"));
  } catch (const DomainError& e) {
    throw ParseError(std::string("model file: field 'filter': ") + e.what());
  }
  if (is_spectral(model.method)) model.filter = FilterSpec::defaults(filter_kind(model.method));
  const json& config = j.at("config");
  model.config = adaptive_config_from_json(config);
  if (config.contains("lasso")) {
    const json& l = config["lasso"];
    model.lasso.grid = field<std::vector<double>>(l, "grid");
    model.lasso.validation_fraction = field<double>(l, "validation_fraction");
    model.lasso.max_iters = field<int>(l, "max_iters");
    model.lasso.tol = field<double>(l, "tol");
  }
  model.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("feature_mask")) {
    for (int v : field<std::vector<int>>(j, "feature_mask")) model.feature_mask.push_back(v != 0);
  }
  const json& stages = j.at("stages");
  if (!stages.is_array() || static_cast<int>(stages.size()) != model.horizon) {
    throw ValidationError("model file: 'stages' must hold one record per stage");
  }
  for (const json& s : stages) {
    StageModel stage;
    stage.t = field<int>(s, "t");
    stage.lambda = field<double>(s, "lambda");
    stage.k = field<int>(s, "k");
    stage.theta = io::vector_from_json(s.at("theta"), "theta");
    if (stage.theta.size() != model.feature_dim || !stage.theta.allFinite()) {
      throw ValidationError("model file: stage " + std::to_string(stage.t) + " theta is malformed");
    }
    model.stages.push_back(std::move(stage));
  }
  for (int t = 1; t <= model.horizon; ++t) {
    if (model.stages[static_cast<std::size_t>(t - 1)].t != t) {
      throw ValidationError("model file: stages must be listed in order t = 1..T");
    }
  }
  return model;
}

json to_json(const StageFitReport& r) {
  return {{"t", r.stage},
          {"budget", r.budget},
          {"k", r.ks},
          {"lambda", r.lambdas},
          {"consecutive_diff", r.consecutive_diff},
          {"threshold", r.thresholds},
          {"phi_next", r.phi_next},
          {"selected_k", r.selected_k},
          {"selected_lambda", r.selected_lambda},
          {"triggered", r.triggered}};
}

json to_json(const std::vector<StageFitReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) out.push_back(to_json(r));
  return out;
}

void save_model(const ModelBundle& model, const std::filesystem::path& path) {
  io::write_text_atomic(path, to_json(model).dump(1) + "\n");
}

ModelBundle load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sblq

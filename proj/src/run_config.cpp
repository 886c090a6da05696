#include "sblq/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"

namespace sblq {

using nlohmann::json;

namespace {

enum class Kind { integer, number, boolean, string, integer_array, number_array, string_array };

struct Field {
  std::string key;
  Kind kind;
  json fallback;
  std::string description;
  bool nullable = false;
  bool locked = false;  // fixed by a preset
  std::vector<std::string> choices = {};
};

const std::vector<std::string> kMethods = {"ls", "lasso", "tikhonov", "gradient-descent", "cutoff"};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"preset", Kind::string, "", "Experiment preset", false, false, {"", "a1-performance", "a2-interpretability"}},
      {"seed", Kind::integer, 0, "Master seed"},
      {"jobs", Kind::integer, 1, "Concurrent tasks for compare"},
      {"out", Kind::string, "out", "Output directory"},
      {"method", Kind::string, "tikhonov", "Estimator used by train", false, false, kMethods},
      {"compare.methods", Kind::string_array, kMethods, "Estimators compared by compare"},
      {"compare.seeds", Kind::integer, 5, "Number of consecutive seeds for compare"},
      {"env.n_users", Kind::integer, 10, "Users in the synthetic pool", false, true},
      {"env.n_actions", Kind::integer, 30, "Candidate videos (actions)", false, true},
      {"env.d_video", Kind::integer, 28, "Video feature dimension", false, true},
      {"env.d_user", Kind::integer, 20, "User feature dimension", false, true},
      {"env.d_action", Kind::integer, 24, "Action feature dimension", false, true},
      {"env.horizon", Kind::integer, 20, "Episode horizon T"},
      {"env.noise_sd", Kind::number, 0.5, "Gaussian noise standard deviation"},
      {"env.reward_low", Kind::number, -0.5, "Lower end of the base reward"},
      {"env.reward_high", Kind::number, 0.5, "Upper end of the base reward"},
      {"env.theta_mode", Kind::string, "time-varying", "Ground-truth parameter schedule", false, true,
       {"time-varying", "static"}},
      {"data.n_trajectories", Kind::integer, 1000, "Trajectories generated by gen and compare"},
      {"data.train_fraction", Kind::number, 0.5, "Training share of the generated trajectories"},
      {"adaptive.q", Kind::number, 0.9, "Grid ratio q"},
      {"adaptive.q0", Kind::number, nullptr, "Grid anchor lambda_0 (null: filter default)", true},
      {"adaptive.budget", Kind::integer, 100, "Grid length cap K"},
      {"adaptive.fixed_budget", Kind::boolean, true, "Use exactly `budget` grid points"},
      {"adaptive.c_ada", Kind::number, nullptr, "Threshold constant C_ada (null: filter default)", true},
      {"adaptive.delta", Kind::number, 0.5, "Confidence level delta"},
      {"adaptive.c_x", Kind::number, 1.0, "Feature norm bound C_x"},
      {"adaptive.b0", Kind::number, 2.0, "Mixing constant b0"},
      {"adaptive.c0", Kind::number, 0.0, "Mixing constant c0 (0: i.i.d.)"},
      {"adaptive.gamma0", Kind::number, 1.0, "Mixing exponent gamma0"},
      {"adaptive.c_tilde", Kind::number, 0.25, "Constant c~ in (0, 0.5)"},
      {"adaptive.c0_effdim", Kind::number, 1.0, "Effective-dimension constant C0 >= 1"},
      {"adaptive.theta_norm_hint", Kind::number, 1.0, "Stand-in for ||theta*||"},
      {"lasso.grid", Kind::number_array, json::array({1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1}),
       "Lasso penalty grid"},
      {"lasso.validation_fraction", Kind::number, 0.2, "Validation share for lasso tuning"},
      {"lasso.max_iters", Kind::integer, 10000, "Coordinate-descent sweep limit"},
      {"lasso.tol", Kind::number, 1e-9, "Coordinate-descent tolerance"},
      {"eval.episodes", Kind::integer, 1000, "Rollout episodes for reward estimates"},
      {"report.clip_pct", Kind::number, 0.05, "Clipped-weight tail fraction"},
      {"report.topk", Kind::integer_array, json::array(), "k values for the top-k reward curve"},
      {"report.groups", Kind::string, "features", "Contribution units", false, false, {"features", "blocks"}},
      {"paths.dataset", Kind::string, "", "Dataset prefix (<p>.header.json, <p>.jsonl)"},
      {"paths.models", Kind::string_array, json::array(), "Model bundle files"},
      {"paths.env", Kind::string, "", "Synthetic environment file"},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::map<std::string, json> preset_values(const std::string& preset) {
  if (preset == "a1-performance") {
    return {{"env.n_users", 10},     {"env.n_actions", 30},   {"env.d_video", 28},
            {"env.d_user", 20},      {"env.d_action", 24},    {"env.horizon", 20},
            {"env.noise_sd", 0.5},   {"env.theta_mode", "time-varying"},
            {"data.n_trajectories", 1000}, {"data.train_fraction", 0.5}, {"adaptive.q", 0.9},
            {"adaptive.budget", 100}, {"adaptive.fixed_budget", true}};
  }
  if (preset == "a2-interpretability") {
    return {{"env.n_users", 10},     {"env.n_actions", 30},   {"env.d_video", 5},
            {"env.d_user", 5},       {"env.d_action", 5},     {"env.horizon", 6},
            {"env.noise_sd", 0.5},   {"env.theta_mode", "static"},
            {"data.n_trajectories", 1000}, {"data.train_fraction", 0.5}, {"adaptive.q", 0.9},
            {"adaptive.budget", 100}, {"adaptive.fixed_budget", true}};
  }
  if (preset.empty()) return {};
  throw ConfigError("field 'preset': unknown preset '" + preset + "'");
}

bool matches(const Field& f, const json& v) {
  if (v.is_null()) return f.nullable;
  auto all_of = [&](auto pred) {
    return v.is_array() && std::all_of(v.begin(), v.end(), pred);
  };
  switch (f.kind) {
    case Kind::integer:
      return v.is_number_integer();
    case Kind::number:
      return v.is_number();
    case Kind::boolean:
      return v.is_boolean();
    case Kind::string:
      return v.is_string() &&
             (f.choices.empty() ||
              std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) != f.choices.end());
    case Kind::integer_array:
      return all_of([](const json& e) { return e.is_number_integer(); });
    case Kind::number_array:
      return all_of([](const json& e) { return e.is_number(); });
    case Kind::string_array:
      return all_of([](const json& e) { return e.is_string(); });
  }
  return false;
}

void check(const std::string& key, const json& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown field '" + key + "'");
  if (!matches(*f, value)) {
    std::string msg = "field '" + key + "' has an invalid value " + value.dump();
    if (!f->choices.empty()) {
      msg += " (expected one of:";
      for (const auto& c : f->choices) msg += " \"" + c + "\"";
      msg += ")";
    }
    throw ConfigError(msg);
  }
}

void flatten(const json& node, const std::string& prefix, std::map<std::string, json>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (it->is_object()) {
        flatten(*it, key, out);
      } else {
        out[key] = *it;
      }
    }
  } else if (!prefix.empty()) {
    out[prefix] = node;
  } else {
    throw ConfigError("configuration must be a JSON object");
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

json unflatten(const std::map<std::string, json>& flat) {
  json doc = json::object();
  for (const auto& [key, value] : flat) {
    json* node = &doc;
    std::size_t start = 0;
    for (std::size_t dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
      node = &(*node)[key.substr(start, dot - start)];
      start = dot + 1;
    }
    (*node)[key.substr(start)] = value;
  }
  return doc;
}

template <typename T>
T get(const std::map<std::string, json>& flat, const std::string& key) {
  return flat.at(key).get<T>();
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("field '" + key + "': " + what);
}

RunConfig resolve(const std::map<std::string, json>& flat) {
  RunConfig cfg;
  cfg.preset = get<std::string>(flat, "preset");
  const json& seed = flat.at("seed");
  require(seed.is_number_unsigned() || seed.get<long long>() >= 0, "seed", "must be nonnegative");
  cfg.seed = seed.get<std::uint64_t>();
  cfg.jobs = get<int>(flat, "jobs");
  require(cfg.jobs >= 1, "jobs", "must be >= 1");
  cfg.out = get<std::string>(flat, "out");

  cfg.method = parse_method(get<std::string>(flat, "method"));
  for (const auto& m : get<std::vector<std::string>>(flat, "compare.methods")) {
    try {
      cfg.compare_methods.push_back(parse_method(m));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'compare.methods': ") + e.what());
    }
  }
  require(!cfg.compare_methods.empty(), "compare.methods", "must name at least one method");
  cfg.compare_seeds = get<int>(flat, "compare.seeds");
  require(cfg.compare_seeds >= 1, "compare.seeds", "must be >= 1");

  EnvSpec& env = cfg.env;
  env.n_users = get<int>(flat, "env.n_users");
  env.n_actions = get<int>(flat, "env.n_actions");
  env.d_video = get<int>(flat, "env.d_video");
  env.d_user = get<int>(flat, "env.d_user");
  env.d_action = get<int>(flat, "env.d_action");
  env.horizon = get<int>(flat, "env.horizon");
  env.noise_sd = get<double>(flat, "env.noise_sd");
  env.reward_low = get<double>(flat, "env.reward_low");
  env.reward_high = get<double>(flat, "env.reward_high");
  env.theta_mode = parse_theta_mode(get<std::string>(flat, "env.theta_mode"));
  env.seed = cfg.seed;
  try {
    env.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  cfg.n_trajectories = get<int>(flat, "data.n_trajectories");
  require(cfg.n_trajectories >= 2, "data.n_trajectories", "must be >= 2");
  cfg.train_fraction = get<double>(flat, "data.train_fraction");
  require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0, "data.train_fraction", "must lie in (0, 1)");

  AdaptiveConfig& a = cfg.adaptive;
  a.q = get<double>(flat, "adaptive.q");
  if (!flat.at("adaptive.q0").is_null()) cfg.q0_override = get<double>(flat, "adaptive.q0");
  a.budget = get<int>(flat, "adaptive.budget");
  a.fixed_budget = get<bool>(flat, "adaptive.fixed_budget");
  if (!flat.at("adaptive.c_ada").is_null()) cfg.c_ada_override = get<double>(flat, "adaptive.c_ada");
  a.delta = get<double>(flat, "adaptive.delta");
  a.c_x = get<double>(flat, "adaptive.c_x");
  a.b0 = get<double>(flat, "adaptive.b0");
  a.c0 = get<double>(flat, "adaptive.c0");
  a.gamma0 = get<double>(flat, "adaptive.gamma0");
  a.c_tilde = get<double>(flat, "adaptive.c_tilde");
  a.c0_effdim = get<double>(flat, "adaptive.c0_effdim");
  a.theta_norm_hint = get<double>(flat, "adaptive.theta_norm_hint");
  try {
    cfg.adaptive_for(Method::tikhonov).validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }

  cfg.lasso.grid = get<std::vector<double>>(flat, "lasso.grid");
  require(!cfg.lasso.grid.empty(), "lasso.grid", "must be nonempty");
  for (double l : cfg.lasso.grid) require(l >= 0.0, "lasso.grid", "entries must be nonnegative");
  cfg.lasso.validation_fraction = get<double>(flat, "lasso.validation_fraction");
  require(cfg.lasso.validation_fraction > 0.0 && cfg.lasso.validation_fraction < 1.0,
          "lasso.validation_fraction", "must lie in (0, 1)");
  cfg.lasso.max_iters = get<int>(flat, "lasso.max_iters");
  require(cfg.lasso.max_iters >= 1, "lasso.max_iters", "must be >= 1");
  cfg.lasso.tol = get<double>(flat, "lasso.tol");
  require(cfg.lasso.tol > 0.0, "lasso.tol", "must be positive");

  cfg.episodes = get<int>(flat, "eval.episodes");
  require(cfg.episodes >= 1, "eval.episodes", "must be >= 1");
  cfg.clip_pct = get<double>(flat, "report.clip_pct");
  require(cfg.clip_pct > 0.0 && cfg.clip_pct < 0.5, "report.clip_pct", "must lie in (0, 0.5)");
  cfg.topk = get<std::vector<int>>(flat, "report.topk");
  cfg.group_blocks = get<std::string>(flat, "report.groups") == "blocks";

  cfg.dataset = get<std::string>(flat, "paths.dataset");
  for (const auto& p : get<std::vector<std::string>>(flat, "paths.models")) cfg.models.emplace_back(p);
  cfg.env_path = get<std::string>(flat, "paths.env");
  cfg.document = unflatten(flat);
  return cfg;
}

}  // namespace

AdaptiveConfig RunConfig::adaptive_for(Method m) const {
  AdaptiveConfig out = adaptive;
  const AdaptiveConfig base =
      AdaptiveConfig::defaults(is_spectral(m) ? filter_kind(m) : FilterKind::tikhonov);
  out.q0 = q0_override.value_or(base.q0);
  out.c_ada = c_ada_override.value_or(base.c_ada);
  return out;
}

RunConfig parse_config_json(const json& document, const std::vector<Override>& overrides) {
  std::map<std::string, json> from_file;
  if (!document.is_null()) flatten(document, "", from_file);
  for (const auto& [key, value] : from_file) check(key, value);

  std::map<std::string, json> from_overrides;
  for (const auto& [key, text] : overrides) {
    const json value = parse_override_value(text);
    check(key, value);
    from_overrides[key] = value;
  }

  std::string preset;
  if (auto it = from_overrides.find("preset"); it != from_overrides.end()) {
    preset = it->second.get<std::string>();
  } else if (auto jt = from_file.find("preset"); jt != from_file.end()) {
    preset = jt->second.get<std::string>();
  }
  const auto locked = preset_values(preset);

  std::map<std::string, json> flat;
  for (const Field& f : fields()) flat[f.key] = f.fallback;
  for (const auto& [key, value] : locked) flat[key] = value;
  flat["preset"] = preset;

  for (const auto* layer : {&from_file, &from_overrides}) {
    for (const auto& [key, value] : *layer) {
      const Field* f = find_field(key);
      if (f->locked && !preset.empty() && locked.count(key) && locked.at(key) != value) {
        throw ConfigError("field '" + key + "' is fixed by preset '" + preset + "' (" +
                          locked.at(key).dump() + "), got " + value.dump());
      }
      flat[key] = value;
    }
  }

  if (!from_file.count("seed") && !from_overrides.count("seed")) {
    if (const char* env_seed = std::getenv("SBLQ_SEED"); env_seed != nullptr && *env_seed != '\0') {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env_seed, &used);
        if (used != std::string(env_seed).size()) throw std::invalid_argument("trailing");
        flat["seed"] = static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("environment variable SBLQ_SEED is not a nonnegative integer");
      }
    }
  }
  return resolve(flat);
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<Override>& overrides) {
  json document;
  if (file) {
    try {
      document = json::parse(io::read_text(*file));
    } catch (const json::parse_error& e) {
      throw ConfigError(file->string() + ": " + e.what());
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  return parse_config_json(document, overrides);
}

json run_config_schema() {
  json root = {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
               {"title", "sblq run configuration"},
               {"type", "object"},
               {"additionalProperties", false},
               {"properties", json::object()}};
  for (const Field& f : fields()) {
    json prop;
    switch (f.kind) {
      case Kind::integer:
        prop["type"] = "integer";
        break;
      case Kind::number:
        prop["type"] = "number";
        break;
      case Kind::boolean:
        prop["type"] = "boolean";
        break;
      case Kind::string:
        prop["type"] = "string";
        if (!f.choices.empty()) prop["enum"] = f.choices;
        break;
      case Kind::integer_array:
        prop = {{"type", "array"}, {"items", {{"type", "integer"}}}};
        break;
      case Kind::number_array:
        prop = {{"type", "array"}, {"items", {{"type", "number"}}}};
        break;
      case Kind::string_array:
        prop = {{"type", "array"}, {"items", {{"type", "string"}}}};
        break;
    }
    if (f.nullable) prop["type"] = json::array({prop["type"], "null"});
    prop["description"] = f.description + (f.locked ? " (fixed by presets)" : "");
    prop["default"] = f.fallback;

    json* node = &root;
    std::size_t start = 0;
    for (std::size_t dot = f.key.find('.'); dot != std::string::npos; dot = f.key.find('.', start)) {
      const std::string section = f.key.substr(start, dot - start);
      json& sub = (*node)["properties"][section];
      if (sub.is_null()) {
        sub = {{"type", "object"}, {"additionalProperties", false}, {"properties", json::object()}};
      }
      node = &sub;
      start = dot + 1;
    }
    (*node)["properties"][f.key.substr(start)] = prop;
  }
  return root;
}

}  // namespace sblq

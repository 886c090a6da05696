#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "helpers.hpp"
#include "sblq/errors.hpp"
#include "sblq/run_config.hpp"

using namespace sblq;
using nlohmann::json;

namespace {

struct SeedEnvGuard {
  SeedEnvGuard() { unsetenv("SBLQ_SEED"); }
  ~SeedEnvGuard() { unsetenv("SBLQ_SEED"); }
};

}  // namespace

TEST_CASE("defaults") {
  SeedEnvGuard guard;
  const auto cfg = parse_config_json(json());
  CHECK(cfg.preset.empty());
  CHECK(cfg.seed == 0);
  CHECK(cfg.method == Method::tikhonov);
  CHECK(cfg.compare_methods.size() == 5);
  CHECK(cfg.n_trajectories == 1000);
  CHECK(cfg.adaptive.delta == 0.5);
  CHECK(cfg.adaptive.q == 0.9);
  CHECK_FALSE(cfg.q0_override.has_value());
  CHECK(cfg.adaptive_for(Method::cutoff).q0 == 30.0);
  CHECK(cfg.adaptive_for(Method::cutoff).c_ada == 1e-4);
  CHECK(cfg.adaptive_for(Method::gradient_descent).c_ada == 1e-5);
  CHECK(cfg.episodes == 1000);
  CHECK(cfg.clip_pct == 0.05);
  CHECK_FALSE(cfg.group_blocks);
}

TEST_CASE("presets and layering") {
  SeedEnvGuard guard;
  const auto a1 = parse_config_json(json{{"preset", "a1-performance"}});
  CHECK(a1.env == EnvSpec::a1_performance());
  CHECK(a1.adaptive.budget == 100);
  CHECK(a1.adaptive.fixed_budget);
  // Anchors stay per filter under the preset.
  CHECK(a1.adaptive_for(Method::tikhonov).q0 == 100.0);
  CHECK(a1.adaptive_for(Method::tikhonov).c_ada == 0.5e-5);
  CHECK(a1.adaptive_for(Method::cutoff).q0 == 30.0);

  const auto a2 = parse_config_json(json{{"preset", "a2-interpretability"}});
  CHECK(a2.env.d_user == 5);
  CHECK(a2.env.horizon == 6);
  CHECK(a2.env.theta_mode == ThetaMode::static_uniform);

  // File over preset, overrides over file.
  const json file = {{"preset", "a1-performance"}, {"adaptive", {{"q", 0.85}, {"c_ada", 2e-5}}}};
  const auto layered = parse_config_json(file, {{"adaptive.q", "0.8"}});
  CHECK(layered.adaptive.q == 0.8);
  CHECK(layered.adaptive_for(Method::tikhonov).c_ada == 2e-5);
  CHECK(layered.adaptive_for(Method::cutoff).c_ada == 2e-5);

  // Locked fields may be restated with the preset value but not changed.
  CHECK_NOTHROW(parse_config_json(file, {{"env.d_user", "20"}}));
  try {
    parse_config_json(file, {{"env.d_user", "7"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("env.d_user") != std::string::npos);
  }
  // Without a preset the same key is free.
  CHECK(parse_config_json(json(), {{"env.d_user", "7"}}).env.d_user == 7);
  CHECK_THROWS_AS(parse_config_json(json{{"preset", "a3"}}), ConfigError);
}

TEST_CASE("validation names the field") {
  SeedEnvGuard guard;
  auto expect_field = [](const json& doc, const std::vector<Override>& ov, const std::string& field) {
    try {
      parse_config_json(doc, ov);
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(field) != std::string::npos, e.what());
    }
  };
  expect_field(json{{"bogus", 1}}, {}, "bogus");
  expect_field(json{{"adaptive", {{"qq", 1}}}}, {}, "adaptive.qq");
  expect_field(json{{"seed", "x"}}, {}, "seed");
  expect_field(json(), {{"adaptive.delta", "0.7"}}, "delta");
  expect_field(json(), {{"method", "\"krr\""}}, "method");
  expect_field(json(), {{"data.train_fraction", "1.5"}}, "train_fraction");
  expect_field(json(), {{"report.groups", "pairs"}}, "report.groups");
  expect_field(json{{"adaptive", {{"budget", 1.5}}}}, {}, "adaptive.budget");
}

TEST_CASE("override parsing") {
  SeedEnvGuard guard;
  const auto cfg = parse_config_json(json(), {{"method", "cutoff"},
                                              {"compare.methods", "[\"ls\",\"cutoff\"]"},
                                              {"adaptive.q0", "12"},
                                              {"report.topk", "[1,3]"},
                                              {"adaptive.fixed_budget", "false"}});
  CHECK(cfg.method == Method::cutoff);
  CHECK(cfg.compare_methods == std::vector<Method>{Method::ls, Method::cutoff});
  CHECK(cfg.adaptive_for(Method::tikhonov).q0 == 12.0);
  CHECK(cfg.topk == std::vector<int>{1, 3});
  CHECK_FALSE(cfg.adaptive.fixed_budget);
}

TEST_CASE("seed from the environment") {
  SeedEnvGuard guard;
  setenv("SBLQ_SEED", "42", 1);
  CHECK(parse_config_json(json()).seed == 42);
  CHECK(parse_config_json(json{{"seed", 7}}).seed == 7);
  CHECK(parse_config_json(json(), {{"seed", "9"}}).seed == 9);
  setenv("SBLQ_SEED", "4x", 1);
  CHECK_THROWS_AS(parse_config_json(json()), ConfigError);
}

TEST_CASE("files and round trip") {
  SeedEnvGuard guard;
  const auto dir = testing::scratch_dir("run_config");
  {
    std::ofstream(dir / "cfg.json") << R"({"preset": "a2-interpretability", "seed": 3, "eval": {"episodes": 50}})";
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  const auto cfg = parse_config(dir / "cfg.json");
  CHECK(cfg.seed == 3);
  CHECK(cfg.episodes == 50);
  CHECK_THROWS_AS(parse_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(parse_config(dir / "missing.json"), ConfigError);

  const auto again = parse_config_json(cfg.document);
  CHECK(again.document == cfg.document);
  CHECK(again.env == cfg.env);
}

TEST_CASE("schema") {
  const json s = run_config_schema();
  CHECK(s["$schema"] == "https://json-schema.org/draft/2020-12/schema");
  CHECK(s["properties"].contains("adaptive"));
  CHECK(s["properties"]["adaptive"]["properties"].contains("c_ada"));
  CHECK(s["properties"]["env"]["properties"]["d_user"]["description"].get<std::string>().find("preset") !=
        std::string::npos);
  CHECK(s["additionalProperties"] == false);
}

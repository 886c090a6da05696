#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sblq/baselines.hpp"
#include "sblq/commands.hpp"
#include "sblq/dataset.hpp"
#include "sblq/errors.hpp"
#include "sblq/interpret.hpp"
#include "sblq/learner.hpp"
#include "sblq/model_io.hpp"
#include "sblq/policy.hpp"
#include "sblq/run_config.hpp"
#include "sblq/spectral.hpp"
#include "sblq/synth.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_python(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& e : j) out.append(to_python(e));
      return out;
    }
    default: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it) out[py::str(it.key())] = to_python(*it);
      return out;
    }
  }
}

json from_python(const py::handle& o) {
  // Round-trip through the json module keeps this small.
  const auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(py::cast<std::string>(dumps(o)));
}

sblq::StageDesign design_of(const sblq::Matrix& rows, const sblq::Vector& rewards) {
  return sblq::StageDesign{1, rows, rewards};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive spectral linear Q-learning";

  auto base = py::register_exception<sblq::Error>(m, "Error");
  py::register_exception<sblq::DomainError>(m, "DomainError", base);
  py::register_exception<sblq::ConfigError>(m, "ConfigError", base);
  py::register_exception<sblq::ParseError>(m, "ParseError", base);
  py::register_exception<sblq::ValidationError>(m, "ValidationError", base);
  py::register_exception<sblq::NumericError>(m, "NumericError", base);

  py::enum_<sblq::FilterKind>(m, "FilterKind")
      .value("tikhonov", sblq::FilterKind::tikhonov)
      .value("cutoff", sblq::FilterKind::cutoff)
      .value("gradient_descent", sblq::FilterKind::gradient_descent);

  py::enum_<sblq::Method>(m, "Method")
      .value("ls", sblq::Method::ls)
      .value("lasso", sblq::Method::lasso)
      .value("tikhonov", sblq::Method::tikhonov)
      .value("gradient_descent", sblq::Method::gradient_descent)
      .value("cutoff", sblq::Method::cutoff);
  m.def("parse_method", &sblq::parse_method);

  py::class_<sblq::FilterSpec>(m, "FilterSpec")
      .def(py::init(&sblq::FilterSpec::defaults), py::arg("kind"))
      .def_readonly("kind", &sblq::FilterSpec::kind)
      .def_readonly("b", &sblq::FilterSpec::b)
      .def_readonly("nu_g", &sblq::FilterSpec::nu_g)
      .def_readonly("gamma_table", &sblq::FilterSpec::gamma_table);

  m.def("filter_value", &sblq::filter_value, py::arg("spec"), py::arg("lam"), py::arg("sigma"));
  m.def("gradient_steps", &sblq::gradient_steps);
  m.def(
      "decompose",
      [](const sblq::Matrix& a) {
        const auto d = sblq::decompose(a);
        return py::make_tuple(d.eigenvalues, d.eigenvectors);
      },
      "Ascending eigenvalues and eigenvectors of a symmetric PSD matrix.");
  m.def(
      "apply_filter",
      [](const sblq::Matrix& a, const sblq::FilterSpec& spec, double lam, const sblq::Vector& v) {
        return sblq::apply_filter(sblq::decompose(a), spec, lam, v);
      },
      py::arg("matrix"), py::arg("spec"), py::arg("lam"), py::arg("v"));
  m.def(
      "effective_dimension",
      [](const sblq::Matrix& a, double lam) {
        return sblq::empirical_effective_dimension(sblq::decompose(a), lam);
      },
      py::arg("matrix"), py::arg("lam"));

  py::class_<sblq::AdaptiveConfig>(m, "AdaptiveConfig")
      .def(py::init(&sblq::AdaptiveConfig::defaults), py::arg("kind") = sblq::FilterKind::tikhonov)
      .def_readwrite("q", &sblq::AdaptiveConfig::q)
      .def_readwrite("q0", &sblq::AdaptiveConfig::q0)
      .def_readwrite("budget", &sblq::AdaptiveConfig::budget)
      .def_readwrite("fixed_budget", &sblq::AdaptiveConfig::fixed_budget)
      .def_readwrite("c_ada", &sblq::AdaptiveConfig::c_ada)
      .def_readwrite("delta", &sblq::AdaptiveConfig::delta)
      .def_readwrite("c_x", &sblq::AdaptiveConfig::c_x)
      .def_readwrite("reward_bound", &sblq::AdaptiveConfig::reward_bound)
      .def("validate", &sblq::AdaptiveConfig::validate)
      .def("to_dict", [](const sblq::AdaptiveConfig& c) { return to_python(sblq::to_json(c)); });

  m.def(
      "fit_stage",
      [](const sblq::Matrix& rows, const sblq::Vector& targets, const sblq::FilterSpec& spec,
         double lam) { return sblq::fit_stage(design_of(rows, targets), targets, spec, lam); },
      py::arg("rows"), py::arg("targets"), py::arg("spec"), py::arg("lam"));
  m.def(
      "select_lambda",
      [](const sblq::Matrix& rows, const sblq::Vector& targets, const sblq::FilterSpec& spec, int t,
         int T, double phi_next, const sblq::AdaptiveConfig& cfg) {
        const auto fit =
            sblq::select_lambda(design_of(rows, targets), targets, spec, t, T, phi_next, cfg);
        return py::make_tuple(fit.lambda, fit.theta, to_python(sblq::to_json(fit.report)));
      },
      py::arg("rows"), py::arg("targets"), py::arg("spec"), py::arg("t") = 1, py::arg("T") = 1,
      py::arg("phi_next") = 0.0, py::arg("cfg") = sblq::AdaptiveConfig{});
  m.def(
      "fit_lasso",
      [](const sblq::Matrix& rows, const sblq::Vector& targets, double lam) {
        return sblq::fit_lasso(design_of(rows, targets), targets, lam).theta;
      },
      py::arg("rows"), py::arg("targets"), py::arg("lam"));

  py::class_<sblq::EnvSpec>(m, "EnvSpec")
      .def(py::init<>())
      .def_static("a1_performance", &sblq::EnvSpec::a1_performance)
      .def_static("a2_interpretability", &sblq::EnvSpec::a2_interpretability)
      .def_readwrite("n_users", &sblq::EnvSpec::n_users)
      .def_readwrite("n_actions", &sblq::EnvSpec::n_actions)
      .def_readwrite("d_video", &sblq::EnvSpec::d_video)
      .def_readwrite("d_user", &sblq::EnvSpec::d_user)
      .def_readwrite("d_action", &sblq::EnvSpec::d_action)
      .def_readwrite("horizon", &sblq::EnvSpec::horizon)
      .def_readwrite("noise_sd", &sblq::EnvSpec::noise_sd)
      .def_property_readonly("feature_dim", &sblq::EnvSpec::feature_dim);

  py::class_<sblq::SyntheticEnv>(m, "SyntheticEnv")
      .def_property_readonly("spec", &sblq::SyntheticEnv::spec)
      .def_property_readonly("theta_star",
                             py::overload_cast<>(&sblq::SyntheticEnv::theta_star, py::const_))
      .def_property_readonly("action_table", &sblq::SyntheticEnv::action_table)
      .def("save", [](const sblq::SyntheticEnv& e, const std::filesystem::path& p) { sblq::save_env(e, p); });
  m.def("make_env", py::overload_cast<const sblq::EnvSpec&, std::uint64_t>(&sblq::make_env),
        py::arg("spec"), py::arg("seed"));
  m.def("load_env", &sblq::load_env);

  py::class_<sblq::BatchDataset>(m, "BatchDataset")
      .def("__len__", &sblq::BatchDataset::size)
      .def_property_readonly("horizon", &sblq::BatchDataset::horizon)
      .def_property_readonly("feature_dim", &sblq::BatchDataset::feature_dim)
      .def_property_readonly("reward_bound", &sblq::BatchDataset::reward_bound)
      .def(
          "stage_design",
          [](const sblq::BatchDataset& d, int t) {
            auto s = sblq::stage_design(d, t);
            return py::make_tuple(s.rows, s.rewards);
          },
          py::arg("t"))
      .def(
          "save",
          [](const sblq::BatchDataset& d, const std::filesystem::path& prefix) {
            const auto p = sblq::DatasetPaths::from_prefix(prefix);
            sblq::save_dataset(d, p.header, p.trajectories);
          },
          py::arg("prefix"))
      .def("split", &sblq::split, py::arg("train_fraction"), py::arg("seed"));
  m.def(
      "load_dataset",
      [](const std::filesystem::path& prefix) {
        const auto p = sblq::DatasetPaths::from_prefix(prefix);
        return sblq::load_dataset(p.header, p.trajectories);
      },
      py::arg("prefix"));
  m.def(
      "generate_trajectories",
      [](const sblq::SyntheticEnv& env, int n, std::uint64_t seed) {
        auto g = sblq::generate_trajectories(env, n, sblq::BehaviorPolicy::uniform_random, seed);
        return g.dataset;
      },
      py::arg("env"), py::arg("n"), py::arg("seed"));

  py::class_<sblq::ModelBundle>(m, "ModelBundle")
      .def_readonly("method", &sblq::ModelBundle::method)
      .def_readonly("horizon", &sblq::ModelBundle::horizon)
      .def("theta", &sblq::ModelBundle::theta, py::arg("t"))
      .def("thetas", &sblq::ModelBundle::thetas)
      .def("lambdas",
           [](const sblq::ModelBundle& mb) {
             std::vector<double> out;
             for (const auto& s : mb.stages) out.push_back(s.lambda);
             return out;
           })
      .def("to_dict", [](const sblq::ModelBundle& mb) { return to_python(sblq::to_json(mb)); })
      .def("save", [](const sblq::ModelBundle& mb, const std::filesystem::path& p) { sblq::save_model(mb, p); });
  m.def("load_model", &sblq::load_model);

  m.def(
      "train",
      [](const sblq::BatchDataset& data, sblq::Method method, std::optional<sblq::AdaptiveConfig> cfg,
         std::uint64_t seed) {
        const sblq::AdaptiveConfig c =
            cfg ? *cfg
                : sblq::AdaptiveConfig::defaults(sblq::is_spectral(method) ? sblq::filter_kind(method)
                                                                           : sblq::FilterKind::tikhonov);
        sblq::TrainOptions options;
        options.seed = seed;
        auto result = sblq::train_method(data, method, c, {}, options);
        return py::make_tuple(result.model, to_python(sblq::to_json(result.reports)));
      },
      py::arg("dataset"), py::arg("method"), py::arg("cfg") = std::nullopt, py::arg("seed") = 0);

  m.def(
      "evaluate",
      [](const sblq::ModelBundle& model, const sblq::BatchDataset& eval, const sblq::SyntheticEnv* env,
         int episodes, std::uint64_t seed) {
        return to_python(sblq::to_json(sblq::evaluate(model, eval, env, episodes, seed)));
      },
      py::arg("model"), py::arg("eval"), py::arg("env") = nullptr, py::arg("episodes") = 1000,
      py::arg("seed") = 0);
  m.def("parameter_gap", &sblq::parameter_gap);

  m.def(
      "contribution_proportions",
      [](const sblq::ModelBundle& model) {
        return to_python(sblq::to_json(sblq::contribution_proportions(model)));
      },
      py::arg("model"));
  m.def(
      "clipped_counts",
      [](const std::vector<sblq::ModelBundle>& models, double pct) {
        std::vector<sblq::WeightEntry> pooled;
        for (std::size_t i = 0; i < models.size(); ++i) {
          auto e = sblq::weight_entries(models[i], std::to_string(i));
          pooled.insert(pooled.end(), e.begin(), e.end());
        }
        const auto flags = sblq::clipped_weights(pooled, pct);
        std::vector<int> counts(models.size(), 0);
        for (std::size_t i = 0; i < pooled.size(); ++i) {
          if (flags[i]) ++counts[std::stoul(pooled[i].method)];
        }
        return counts;
      },
      py::arg("models"), py::arg("pct") = 0.05,
      "Clipped-weight count per model over the pooled weights of all models.");

  m.def(
      "parse_config",
      [](py::object document, const std::vector<sblq::Override>& overrides) {
        return to_python(sblq::parse_config_json(from_python(document), overrides).document);
      },
      py::arg("document") = py::dict(), py::arg("overrides") = std::vector<sblq::Override>{});
  m.def("config_schema", [] { return to_python(sblq::run_config_schema()); });
  m.def(
      "run",
      [](const std::string& command, py::object document, const std::vector<sblq::Override>& overrides) {
        const auto cfg = sblq::parse_config_json(from_python(document), overrides);
        py::gil_scoped_release release;
        return sblq::run(command, cfg);
      },
      py::arg("command"), py::arg("document") = py::dict(),
      py::arg("overrides") = std::vector<sblq::Override>{});
}

#include "sblq/policy.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"

namespace sblq {

using nlohmann::json;

namespace {

template <typename ChooseAction>
double run_episodes(const EpisodeSimulator& env, int n_episodes, std::uint64_t seed,
                    ChooseAction&& choose) {
  if (n_episodes < 1) throw DomainError("rollout needs at least one episode");
  double total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(e)));
    Vector state = env.initial_state(rng);
    double episode = 0.0;
    for (int t = 1; t <= env.horizon(); ++t) {
      const int action = choose(t, state, rng);
      EpisodeSimulator::Step step = env.step(t, state, action, rng);
      episode += step.reward;
      state = std::move(step.next_state);
    }
    total += episode;
  }
  return total / n_episodes;
}

void check_horizon(const ModelBundle& model, const std::vector<Vector>& theta_star, int T) {
  if (model.horizon != T) throw ShapeError("model horizon does not match dataset horizon");
  if (static_cast<int>(theta_star.size()) < T) throw ShapeError("ground truth has too few stages");
}

}  // namespace

GreedyPolicy::GreedyPolicy(ModelBundle model, Matrix action_table, bool normalize)
    : model_(std::move(model)), action_table_(std::move(action_table)), normalize_(normalize) {
  if (action_table_.rows() < 1) throw ConfigError("greedy policy needs a nonempty action table");
  for (const StageModel& s : model_.stages) {
    if (s.theta.size() != model_.feature_dim) throw ShapeError("stage parameter dimension mismatch");
  }
}

int greedy_action(const Vector& theta, const Vector& state, const Matrix& action_table, bool normalize) {
  if (action_table.rows() < 1) throw ConfigError("empty action table");
  if (state.size() + action_table.cols() != theta.size()) {
    throw ShapeError("state and action dimensions do not add up to the parameter dimension");
  }
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < action_table.rows(); ++a) {
    const double score = feature_vector(state, action_table.row(a).transpose(), normalize).dot(theta);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(a);
    }
  }
  return best;
}

int GreedyPolicy::act(int t, const Vector& state) const {
  if (t < 1 || t > model_.horizon) throw IndexError("act: stage out of range");
  return greedy_action(model_.theta(t), state, action_table_, normalize_);
}

double parameter_gap(const std::vector<Vector>& estimated, const std::vector<Vector>& truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw ShapeError("parameter_gap needs equally many (>= 1) estimated and true parameters");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < estimated.size(); ++t) {
    if (estimated[t].size() != truth[t].size()) throw ShapeError("parameter dimension mismatch");
    total += (estimated[t] - truth[t]).squaredNorm();
  }
  return std::sqrt(total / static_cast<double>(estimated.size()));
}

double policy_gap(const ModelBundle& model, const std::vector<Vector>& theta_star,
                  const BatchDataset& eval) {
  const int T = eval.horizon();
  if (static_cast<int>(theta_star.size()) != T + 1) {
    throw ConfigError("policy_gap needs ground truth for stages 1..T+1");
  }
  check_horizon(model, theta_star, T);
  const Vector zero = Vector::Zero(eval.feature_dim());
  double total = 0.0;
  for (int t = 1; t <= T; ++t) {
    const Vector& est_next = t < T ? model.theta(t + 1) : zero;
    const Vector y_hat = construct_targets(eval, t, est_next);
    const Vector y = construct_targets(eval, t, theta_star[static_cast<std::size_t>(t)]);
    total += (y_hat - y).squaredNorm() / static_cast<double>(eval.size());
  }
  return std::sqrt(total / T);
}

double policy_gap(const ModelBundle& model, const SyntheticEnv& env, const BatchDataset& eval) {
  return policy_gap(model, env.theta_star(), eval);
}

double rollout_reward(const GreedyPolicy& policy, const EpisodeSimulator& env, int n_episodes,
                      std::uint64_t seed) {
  if (policy.model().horizon != env.horizon()) throw ShapeError("policy horizon does not match env");
  return run_episodes(env, n_episodes, seed,
                      [&](int t, const Vector& state, Rng&) { return policy.act(t, state); });
}

double rollout_uniform_reward(const EpisodeSimulator& env, int n_episodes, std::uint64_t seed) {
  const auto n_actions = static_cast<std::uint64_t>(env.action_table().rows());
  return run_episodes(env, n_episodes, seed, [&](int, const Vector&, Rng& rng) {
    return static_cast<int>(rng.index(n_actions));
  });
}

double direct_value_estimate(const ModelBundle& model, const BatchDataset& dataset) {
  if (model.feature_dim != dataset.feature_dim()) throw ShapeError("model/dataset dimension mismatch");
  const Vector& theta = model.theta(1);
  double total = 0.0;
  for (const Trajectory& traj : dataset.trajectories()) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < dataset.action_count(); ++a) {
      best = std::max(best, dataset.features(traj.states.front(), a).dot(theta));
    }
    total += best;
  }
  return total / static_cast<double>(dataset.size());
}

double comparison_diagnostic(const ModelBundle& model, const std::vector<Vector>& theta_star,
                             const BatchDataset& eval, double mu) {
  const int T = eval.horizon();
  check_horizon(model, theta_star, T);
  if (!(mu > 0.0)) throw DomainError("mu must be positive");
  double total = 0.0;
  for (int t = 1; t <= T; ++t) {
    const Matrix sigma = empirical_covariance(stage_design(eval, t));
    const Vector diff = model.theta(t) - theta_star[static_cast<std::size_t>(t - 1)];
    const double weighted = std::sqrt(std::max(0.0, diff.dot(sigma * diff)));
    total += 2.0 * std::pow(mu, t / 2.0) * weighted;
  }
  return total;
}

MetricsReport evaluate(const ModelBundle& model, const BatchDataset& eval, const SyntheticEnv* env,
                       int n_episodes, std::uint64_t seed) {
  MetricsReport report;
  report.method = std::string(to_string(model.method));
  report.direct_value = direct_value_estimate(model, eval);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const StageModel& s : model.stages) {
    report.per_stage.push_back({s.t, s.lambda, s.k, nan, nan});
  }
  if (env == nullptr) return report;

  report.has_ground_truth = true;
  const auto& truth = env->theta_star();
  const std::vector<Vector> truth_t(truth.begin(), truth.begin() + model.horizon);
  report.parameter_gap = parameter_gap(model.thetas(), truth_t);
  report.policy_gap = policy_gap(model, truth, eval);
  report.comparison_bound =
      comparison_diagnostic(model, truth, eval, static_cast<double>(env->spec().n_actions));
  const GreedyPolicy policy(model, env->action_pool(), true);
  report.cumulative_reward = rollout_reward(policy, *env, n_episodes, seed);
  const Vector zero = Vector::Zero(model.feature_dim);
  for (auto& st : report.per_stage) {
    st.theta_error = (model.theta(st.t) - truth[static_cast<std::size_t>(st.t - 1)]).norm();
    const Vector& est_next = st.t < model.horizon ? model.theta(st.t + 1) : zero;
    const Vector diff = construct_targets(eval, st.t, est_next) -
                        construct_targets(eval, st.t, truth[static_cast<std::size_t>(st.t)]);
    st.target_mse = diff.squaredNorm() / static_cast<double>(eval.size());
  }
  return report;
}

json to_json(const MetricsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json stages = json::array();
  for (const auto& s : r.per_stage) {
    stages.push_back({{"t", s.t},
                      {"lambda", s.lambda},
                      {"k", s.k},
                      {"theta_error", num(s.theta_error)},
                      {"target_mse", num(s.target_mse)}});
  }
  json out = {{"method", r.method},
              {"direct_value", r.direct_value},
              {"has_ground_truth", r.has_ground_truth},
              {"per_stage", std::move(stages)}};
  if (r.has_ground_truth) {
    out["parameter_gap"] = r.parameter_gap;
    out["policy_gap"] = r.policy_gap;
    out["cumulative_reward"] = r.cumulative_reward;
    out["comparison_bound"] = r.comparison_bound;
  }
  return out;
}

std::string csv_header(const MetricsReport& r) {
  return r.has_ground_truth
             ? "method,parameter_gap,policy_gap,cumulative_reward,direct_value,comparison_bound"
             : "method,direct_value";
}

std::string csv_row(const MetricsReport& r) {
  if (!r.has_ground_truth) return r.method + "," + io::format_real(r.direct_value);
  return r.method + "," + io::format_real(r.parameter_gap) + "," + io::format_real(r.policy_gap) +
         "," + io::format_real(r.cumulative_reward) + "," + io::format_real(r.direct_value) + "," +
         io::format_real(r.comparison_bound);
}

}  // namespace sblq

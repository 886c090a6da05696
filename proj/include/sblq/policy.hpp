#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sblq/dataset.hpp"
#include "sblq/learner.hpp"
#include "sblq/random.hpp"
#include "sblq/synth.hpp"

namespace sblq {

// pi_t(state) = argmax_a <theta_t, x(state, a)>, ties to the lowest index.
class GreedyPolicy {
 public:
  GreedyPolicy(ModelBundle model, Matrix action_table, bool normalize = true);

  int act(int t, const Vector& state) const;
  const ModelBundle& model() const { return model_; }
  const Matrix& action_table() const { return action_table_; }

 private:
  ModelBundle model_;
  Matrix action_table_;
  bool normalize_;
};

// argmax of <theta, x(state, a)> over the table rows; lowest index on ties.
int greedy_action(const Vector& theta, const Vector& state, const Matrix& action_table, bool normalize);

// sqrt((1/T) sum_t ||estimated_t - truth_t||^2).
double parameter_gap(const std::vector<Vector>& estimated, const std::vector<Vector>& truth);

// Root of the stage-averaged mean squared difference between targets built
// with the learned and with the true next-stage parameters. `theta_star` holds
// T + 1 entries with the last one zero.
double policy_gap(const ModelBundle& model, const std::vector<Vector>& theta_star,
                  const BatchDataset& eval);
double policy_gap(const ModelBundle& model, const SyntheticEnv& env, const BatchDataset& eval);

// Mean cumulative reward over seeded episodes; episode e uses mix_seed(seed, e).
double rollout_reward(const GreedyPolicy& policy, const EpisodeSimulator& env, int n_episodes,
                      std::uint64_t seed);
// Same, acting uniformly at random.
double rollout_uniform_reward(const EpisodeSimulator& env, int n_episodes, std::uint64_t seed);

// Mean over trajectories of max_a <theta_1, x(s_1, a)>.
double direct_value_estimate(const ModelBundle& model, const BatchDataset& dataset);

// sum_t 2 mu^{t/2} ||theta_t - theta*_t||_{Sigma_t}, with Sigma_t the stage-t
// empirical covariance of `eval`.
double comparison_diagnostic(const ModelBundle& model, const std::vector<Vector>& theta_star,
                             const BatchDataset& eval, double mu);

struct StageDiagnostics {
  int t = 0;
  double lambda = 0.0;
  int k = 0;
  double theta_error = 0.0;  // NaN without ground truth
  double target_mse = 0.0;   // NaN without ground truth
};

struct MetricsReport {
  std::string method;
  double parameter_gap = 0.0;
  double policy_gap = 0.0;
  double cumulative_reward = 0.0;
  double direct_value = 0.0;
  double comparison_bound = 0.0;
  bool has_ground_truth = false;
  std::vector<StageDiagnostics> per_stage;
};

// With an environment every metric is computed; without one only the
// direct value estimate and per-stage lambdas are reported.
MetricsReport evaluate(const ModelBundle& model, const BatchDataset& eval, const SyntheticEnv* env,
                       int n_episodes, std::uint64_t seed);

nlohmann::json to_json(const MetricsReport& report);
std::string csv_header(const MetricsReport& report);
std::string csv_row(const MetricsReport& report);

}  // namespace sblq

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sblq/dataset.hpp"
#include "sblq/random.hpp"
#include "sblq/spectral.hpp"

namespace sblq {

// Episodic environment driven by a seeded stream; states are feature vectors.
class EpisodeSimulator {
 public:
  struct Step {
    double reward = 0.0;
    Vector next_state;
  };

  virtual ~EpisodeSimulator() = default;
  virtual int horizon() const = 0;
  virtual const Matrix& action_table() const = 0;
  virtual bool normalize_features() const = 0;
  virtual Vector initial_state(Rng& rng) const = 0;
  // Stage t is 1-based.
  virtual Step step(int t, const Vector& state, int action, Rng& rng) const = 0;
};

enum class ThetaMode { time_varying, static_uniform };

std::string_view to_string(ThetaMode mode);
ThetaMode parse_theta_mode(std::string_view name);

struct EnvSpec {
  int n_users = 10;
  int n_actions = 30;  // candidate videos; each has video and action features
  int d_video = 28;
  int d_user = 20;
  int d_action = 24;
  int horizon = 20;
  double noise_sd = 0.5;
  double reward_low = -0.5;
  double reward_high = 0.5;
  ThetaMode theta_mode = ThetaMode::time_varying;
  std::uint64_t seed = 0;

  static EnvSpec a1_performance();
  static EnvSpec a2_interpretability();

  int state_dim() const { return d_user + d_video; }
  int feature_dim() const { return d_user + d_video + d_action; }
  void validate() const;  // throws DomainError
  bool operator==(const EnvSpec&) const = default;
};

// First ceil(d/2) entries ~ N(1, 0.2^2), the rest ~ N(-1, 0.2^2), then unit-normalized.
Vector sample_theta_star(int d, Rng& rng);

// Linear video-recommendation environment.
//
// State: (user features, current video features). Choosing candidate j moves
// the video component to video j. With x = unit-normalized (state, action j),
// the logged reward is
//   r_t = u_t + eps_t + <x, theta*_t> - max_a <x(s_{t+1}, a), theta*_{t+1}>,
// u_t ~ U(reward_low, reward_high), eps_t ~ N(0, noise_sd^2), theta*_{T+1} = 0.
// Hence the Bellman target r_t + max_a <theta*_{t+1}, x(s_{t+1}, a)> equals
// u_t + <x_t, theta*_t> + eps_t and Q*_t(x) = <x, theta*_t> + E[u] exactly.
class SyntheticEnv final : public EpisodeSimulator {
 public:
  SyntheticEnv(EnvSpec spec, Matrix user_pool, Matrix video_pool, Matrix action_pool,
               std::vector<Vector> theta_star);

  const EnvSpec& spec() const { return spec_; }
  const Matrix& user_pool() const { return user_pool_; }
  const Matrix& video_pool() const { return video_pool_; }
  const Matrix& action_pool() const { return action_pool_; }
  // Stages 1..T+1; the last entry is the zero vector.
  const std::vector<Vector>& theta_star() const { return theta_star_; }
  const Vector& theta_star(int t) const { return theta_star_.at(static_cast<std::size_t>(t - 1)); }

  Vector state(int user, int video) const;
  Vector features(const Vector& state, int action) const;
  double q_value(int t, const Vector& state, int action) const;
  // max_a Q*_t(state, a); zero for t = T + 1.
  double optimal_value(int t, const Vector& state) const;
  Vector next_state(const Vector& state, int action) const;

  int horizon() const override { return spec_.horizon; }
  const Matrix& action_table() const override { return action_pool_; }
  bool normalize_features() const override { return true; }
  Vector initial_state(Rng& rng) const override;
  Step step(int t, const Vector& state, int action, Rng& rng) const override;

  bool operator==(const SyntheticEnv& other) const;

 private:
  EnvSpec spec_;
  Matrix user_pool_;
  Matrix video_pool_;
  Matrix action_pool_;
  std::vector<Vector> theta_star_;
};

SyntheticEnv make_env(const EnvSpec& spec, std::uint64_t seed);
inline SyntheticEnv make_env(const EnvSpec& spec) { return make_env(spec, spec.seed); }

struct GroundTruth {
  std::vector<Vector> theta_star;  // T + 1 entries, last zero
  Matrix base_rewards;             // u_{i,t}, n x T
  Matrix noise;                    // eps_{i,t}, n x T

  // u + <x, theta*_t> + eps: the Bellman target under the true next-stage parameter.
  Vector targets_star(const BatchDataset& dataset, int t) const;
  // <x, theta*_t> + E[u].
  Vector targets_noisefree(const BatchDataset& dataset, int t, double reward_mean) const;
};

enum class BehaviorPolicy { uniform_random };

struct Generated {
  BatchDataset dataset;
  GroundTruth truth;
};

// Declared reward bound: max(1.5, max |r|) rounded up to two decimals.
Generated generate_trajectories(const SyntheticEnv& env, int n,
                                BehaviorPolicy behavior = BehaviorPolicy::uniform_random,
                                std::uint64_t seed = 0);

// One draw of u + <x, theta*_t> + eps for t in [1, T + 1].
double observe_target(const SyntheticEnv& env, const Vector& x, int t, Rng& rng);

nlohmann::json to_json(const EnvSpec& spec);
EnvSpec env_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticEnv& env);
SyntheticEnv env_from_json(const nlohmann::json& j);
nlohmann::json ground_truth_json(const std::vector<Vector>& theta_star);

void save_env(const SyntheticEnv& env, const std::filesystem::path& path);
SyntheticEnv load_env(const std::filesystem::path& path);

}  // namespace sblq

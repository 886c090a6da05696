#include "sblq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sblq/errors.hpp"
#include "sblq/io.hpp"

namespace sblq {

using nlohmann::json;

namespace {

constexpr double kMinRewardBound = 1.5;

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("env file: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("env file: field '") + name + "' has the wrong type");
  }
}

}  // namespace

std::string_view to_string(ThetaMode mode) {
  return mode == ThetaMode::time_varying ? "time-varying" : "static";
}

ThetaMode parse_theta_mode(std::string_view name) {
  if (name == "time-varying") return ThetaMode::time_varying;
  if (name == "static") return ThetaMode::static_uniform;
  throw DomainError("unknown theta mode '" + std::string(name) + "'");
}

EnvSpec EnvSpec::a1_performance() { return EnvSpec{}; }

EnvSpec EnvSpec::a2_interpretability() {
  EnvSpec spec;
  spec.d_video = 5;
  spec.d_user = 5;
  spec.d_action = 5;
  spec.horizon = 6;
  spec.theta_mode = ThetaMode::static_uniform;
  return spec;
}

void EnvSpec::validate() const {
  if (n_users < 1 || n_actions < 1) throw DomainError("env: pool sizes must be >= 1");
  if (d_video < 1 || d_user < 1 || d_action < 1) throw DomainError("env: dimensions must be >= 1");
  if (horizon < 1) throw DomainError("env: horizon must be >= 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw DomainError("env: noise_sd must be >= 0");
  if (!(reward_low < reward_high)) throw DomainError("env: reward_low must be below reward_high");
}

Vector sample_theta_star(int d, Rng& rng) {
  if (d < 2) throw DomainError("sample_theta_star needs d >= 2");
  Vector theta(d);
  const int first = (d + 1) / 2;
  for (int j = 0; j < d; ++j) theta[j] = rng.normal(j < first ? 1.0 : -1.0, 0.2);
  return theta / theta.norm();
}

SyntheticEnv::SyntheticEnv(EnvSpec spec, Matrix user_pool, Matrix video_pool, Matrix action_pool,
                           std::vector<Vector> theta_star)
    : spec_(spec),
      user_pool_(std::move(user_pool)),
      video_pool_(std::move(video_pool)),
      action_pool_(std::move(action_pool)),
      theta_star_(std::move(theta_star)) {
  spec_.validate();
  if (user_pool_.rows() != spec_.n_users || user_pool_.cols() != spec_.d_user ||
      video_pool_.rows() != spec_.n_actions || video_pool_.cols() != spec_.d_video ||
      action_pool_.rows() != spec_.n_actions || action_pool_.cols() != spec_.d_action) {
    throw ShapeError("env: pool shapes do not match the EnvSpec dimensions");
  }
  if (static_cast<int>(theta_star_.size()) != spec_.horizon + 1) {
    throw ShapeError("env: theta_star needs horizon + 1 entries");
  }
  for (const Vector& th : theta_star_) {
    if (th.size() != spec_.feature_dim() || !th.allFinite()) {
      throw ShapeError("env: theta_star entries must be finite feature-dimension vectors");
    }
  }
  if (!theta_star_.back().isZero(0.0)) throw DomainError("env: theta_star[T+1] must be zero");
}

Vector SyntheticEnv::state(int user, int video) const {
  Vector s(spec_.state_dim());
  s << user_pool_.row(user).transpose(), video_pool_.row(video).transpose();
  return s;
}

Vector SyntheticEnv::features(const Vector& state, int action) const {
  return feature_vector(state, action_pool_.row(action).transpose(), true);
}

double SyntheticEnv::q_value(int t, const Vector& state, int action) const {
  return features(state, action).dot(theta_star(t));
}

double SyntheticEnv::optimal_value(int t, const Vector& state) const {
  if (t > spec_.horizon) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < spec_.n_actions; ++a) best = std::max(best, q_value(t, state, a));
  return best;
}

Vector SyntheticEnv::next_state(const Vector& state, int action) const {
  Vector next = state;
  next.tail(spec_.d_video) = video_pool_.row(action).transpose();
  return next;
}

Vector SyntheticEnv::initial_state(Rng& rng) const {
  const auto user = static_cast<int>(rng.index(static_cast<std::uint64_t>(spec_.n_users)));
  const auto video = static_cast<int>(rng.index(static_cast<std::uint64_t>(spec_.n_actions)));
  return state(user, video);
}

EpisodeSimulator::Step SyntheticEnv::step(int t, const Vector& state, int action, Rng& rng) const {
  if (t < 1 || t > spec_.horizon) throw IndexError("env step: stage out of range");
  if (action < 0 || action >= spec_.n_actions) throw IndexError("env step: action out of range");
  const double u = rng.uniform(spec_.reward_low, spec_.reward_high);
  const double eps = spec_.noise_sd > 0.0 ? rng.normal(0.0, spec_.noise_sd) : 0.0;
  Step out;
  out.next_state = next_state(state, action);
  out.reward = u + eps + q_value(t, state, action) - optimal_value(t + 1, out.next_state);
  return out;
}

bool SyntheticEnv::operator==(const SyntheticEnv& other) const {
  if (!(spec_ == other.spec_) || user_pool_ != other.user_pool_ ||
      video_pool_ != other.video_pool_ || action_pool_ != other.action_pool_) {
    return false;
  }
  return theta_star_ == other.theta_star_;
}

SyntheticEnv make_env(const EnvSpec& spec_in, std::uint64_t seed) {
  EnvSpec spec = spec_in;
  spec.seed = seed;
  spec.validate();
  Rng rng(seed);
  Matrix users = gaussian_matrix(spec.n_users, spec.d_user, rng);
  Matrix videos = gaussian_matrix(spec.n_actions, spec.d_video, rng);
  Matrix actions = gaussian_matrix(spec.n_actions, spec.d_action, rng);
  const int d = spec.feature_dim();
  std::vector<Vector> theta;
  theta.reserve(static_cast<std::size_t>(spec.horizon) + 1);
  if (spec.theta_mode == ThetaMode::static_uniform) {
    const Vector shared = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    for (int t = 1; t <= spec.horizon; ++t) theta.push_back(shared);
  } else {
    for (int t = 1; t <= spec.horizon; ++t) theta.push_back(sample_theta_star(d, rng));
  }
  theta.push_back(Vector::Zero(d));
  return SyntheticEnv(spec, std::move(users), std::move(videos), std::move(actions), std::move(theta));
}

Vector GroundTruth::targets_star(const BatchDataset& dataset, int t) const {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto s = static_cast<std::size_t>(t - 1);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trajectory& traj = dataset.trajectory(static_cast<std::size_t>(i));
    const Vector x = dataset.features(traj.states[s], traj.actions[s]);
    y[i] = base_rewards(i, t - 1) + x.dot(theta_star.at(s)) + noise(i, t - 1);
  }
  return y;
}

Vector GroundTruth::targets_noisefree(const BatchDataset& dataset, int t, double reward_mean) const {
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto s = static_cast<std::size_t>(t - 1);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trajectory& traj = dataset.trajectory(static_cast<std::size_t>(i));
    y[i] = dataset.features(traj.states[s], traj.actions[s]).dot(theta_star.at(s)) + reward_mean;
  }
  return y;
}

Generated generate_trajectories(const SyntheticEnv& env, int n, BehaviorPolicy behavior,
                                std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_trajectories needs n >= 1");
  (void)behavior;  // uniform_random is the only logging policy
  const EnvSpec& spec = env.spec();
  const int T = spec.horizon;

  GroundTruth truth{env.theta_star(), Matrix(n, T), Matrix(n, T)};
  std::vector<Trajectory> trajectories(static_cast<std::size_t>(n));
  double max_abs_reward = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    Trajectory& traj = trajectories[static_cast<std::size_t>(i)];
    Vector state = env.initial_state(rng);
    for (int t = 1; t <= T; ++t) {
      const auto action = static_cast<int>(rng.index(static_cast<std::uint64_t>(spec.n_actions)));
      // Same draw order as SyntheticEnv::step, recorded for diagnostics.
      const double u = rng.uniform(spec.reward_low, spec.reward_high);
      const double eps = spec.noise_sd > 0.0 ? rng.normal(0.0, spec.noise_sd) : 0.0;
      const Vector next = env.next_state(state, action);
      const double r = u + eps + env.q_value(t, state, action) - env.optimal_value(t + 1, next);
      truth.base_rewards(i, t - 1) = u;
      truth.noise(i, t - 1) = eps;
      traj.states.push_back(state);
      traj.actions.push_back(action);
      traj.rewards.push_back(r);
      max_abs_reward = std::max(max_abs_reward, std::abs(r));
      state = next;
    }
  }

  DatasetHeader header;
  header.horizon = T;
  header.state_dim = spec.state_dim();
  header.action_dim = spec.d_action;
  header.reward_bound = std::max(kMinRewardBound, std::ceil(max_abs_reward * 100.0) / 100.0);
  header.normalize = true;
  header.action_table = env.action_pool();
  return Generated{BatchDataset(std::move(header), std::move(trajectories)), std::move(truth)};
}

double observe_target(const SyntheticEnv& env, const Vector& x, int t, Rng& rng) {
  const EnvSpec& spec = env.spec();
  if (t < 1 || t > spec.horizon + 1) throw IndexError("observe_target: stage out of range");
  if (x.size() != spec.feature_dim()) throw ShapeError("observe_target: feature dimension mismatch");
  const double u = rng.uniform(spec.reward_low, spec.reward_high);
  const double eps = spec.noise_sd > 0.0 ? rng.normal(0.0, spec.noise_sd) : 0.0;
  return u + x.dot(env.theta_star(t)) + eps;
}

json to_json(const EnvSpec& spec) {
  return {{"n_users", spec.n_users},     {"n_actions", spec.n_actions},
          {"d_video", spec.d_video},     {"d_user", spec.d_user},
          {"d_action", spec.d_action},   {"horizon", spec.horizon},
          {"noise_sd", spec.noise_sd},   {"reward_low", spec.reward_low},
          {"reward_high", spec.reward_high},
          {"theta_mode", std::string(to_string(spec.theta_mode))},
          {"seed", spec.seed}};
}

EnvSpec env_spec_from_json(const json& j) {
  EnvSpec spec;
  spec.n_users = field<int>(j, "n_users");
  spec.n_actions = field<int>(j, "n_actions");
  spec.d_video = field<int>(j, "d_video");
  spec.d_user = field<int>(j, "d_user");
  spec.d_action = field<int>(j, "d_action");
  spec.horizon = field<int>(j, "horizon");
  spec.noise_sd = field<double>(j, "noise_sd");
  spec.reward_low = field<double>(j, "reward_low");
  spec.reward_high = field<double>(j, "reward_high");
  spec.theta_mode = parse_theta_mode(field<std::string>(j, "theta_mode"));
  spec.seed = field<std::uint64_t>(j, "seed");
  return spec;
}

json ground_truth_json(const std::vector<Vector>& theta_star) {
  json rows = json::array();
  for (const Vector& th : theta_star) rows.push_back(io::to_json(th));
  return {{"theta_star", std::move(rows)}};
}

json to_json(const SyntheticEnv& env) {
  json out = ground_truth_json(env.theta_star());
  out["spec"] = to_json(env.spec());
  out["user_pool"] = io::to_json(env.user_pool());
  out["video_pool"] = io::to_json(env.video_pool());
  out["action_pool"] = io::to_json(env.action_pool());
  return out;
}

SyntheticEnv env_from_json(const json& j) {
  if (!j.is_object() || !j.contains("spec")) throw ParseError("env file: missing field 'spec'");
  EnvSpec spec = env_spec_from_json(j["spec"]);
  std::vector<Vector> theta;
  if (!j.contains("theta_star") || !j["theta_star"].is_array()) {
    throw ParseError("env file: missing field 'theta_star'");
  }
  for (const json& row : j["theta_star"]) theta.push_back(io::vector_from_json(row, "theta_star"));
  auto pool = [&](const char* name) {
    if (!j.contains(name)) throw ParseError(std::string("env file: missing field '") + name + "'");
    return io::matrix_from_json(j[name], name);
  };
  return SyntheticEnv(spec, pool("user_pool"), pool("video_pool"), pool("action_pool"), std::move(theta));
}

void save_env(const SyntheticEnv& env, const std::filesystem::path& path) {
  io::write_text_atomic(path, to_json(env).dump() + "\n");
}

SyntheticEnv load_env(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return env_from_json(j);
}

}  // namespace sblq

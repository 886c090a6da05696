#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sblq/errors.hpp"
#include "sblq/synth.hpp"

using namespace sblq;

namespace {

EnvSpec small_spec() {
  EnvSpec spec;
  spec.n_users = 4;
  spec.n_actions = 5;
  spec.d_user = 3;
  spec.d_video = 2;
  spec.d_action = 3;
  spec.horizon = 3;
  return spec;
}

}  // namespace

TEST_CASE("presets") {
  const auto a1 = EnvSpec::a1_performance();
  CHECK(a1.n_users == 10);
  CHECK(a1.n_actions == 30);
  CHECK(a1.d_video == 28);
  CHECK(a1.d_user == 20);
  CHECK(a1.d_action == 24);
  CHECK(a1.horizon == 20);
  CHECK(a1.noise_sd == 0.5);
  CHECK(a1.feature_dim() == 72);
  CHECK(a1.theta_mode == ThetaMode::time_varying);
  const auto a2 = EnvSpec::a2_interpretability();
  CHECK(a2.feature_dim() == 15);
  CHECK(a2.horizon == 6);
  CHECK(a2.theta_mode == ThetaMode::static_uniform);

  auto bad = a1;
  bad.noise_sd = -1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(parse_theta_mode("sometimes"), DomainError);
}

TEST_CASE("theta star sampling") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector th = sample_theta_star(7, rng);
    CHECK(th.norm() == doctest::Approx(1.0));
    for (int j = 0; j < 4; ++j) CHECK(th[j] > 0.0);
    for (int j = 4; j < 7; ++j) CHECK(th[j] < 0.0);
  }
  CHECK_THROWS_AS(sample_theta_star(1, rng), DomainError);

  const auto env = make_env(EnvSpec::a2_interpretability(), 2);
  const double c = 1.0 / std::sqrt(15.0);
  for (int t = 1; t <= 6; ++t) CHECK(env.theta_star(t).isApprox(Vector::Constant(15, c)));
  CHECK(env.theta_star(7).isZero());
}

TEST_CASE("environment determinism and shapes") {
  const auto a = make_env(small_spec(), 3);
  const auto b = make_env(small_spec(), 3);
  const auto c = make_env(small_spec(), 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.user_pool().rows() == 4);
  CHECK(a.video_pool().cols() == 2);
  CHECK(a.theta_star().size() == 4);
  CHECK(a.features(a.state(0, 0), 1).norm() == doctest::Approx(1.0));

  const Vector s = a.state(1, 2);
  const Vector next = a.next_state(s, 4);
  CHECK(next.head(3) == s.head(3));
  CHECK(next.tail(2) == a.video_pool().row(4).transpose());
}

TEST_CASE("rewards are Bellman consistent") {
  auto spec = small_spec();
  spec.noise_sd = 0.3;
  const auto env = make_env(spec, 7);
  const auto g = generate_trajectories(env, 50, BehaviorPolicy::uniform_random, 8);
  const auto& ds = g.dataset;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& tr = ds.trajectory(i);
    for (int t = 1; t <= spec.horizon; ++t) {
      const auto s = static_cast<std::size_t>(t - 1);
      const Vector x = env.features(tr.states[s], tr.actions[s]);
      double next_best = 0.0;
      if (t < spec.horizon) {
        next_best = -1e300;
        for (int a = 0; a < spec.n_actions; ++a) {
          next_best = std::max(next_best, env.features(tr.states[s + 1], a).dot(env.theta_star(t + 1)));
        }
      }
      const double u = g.truth.base_rewards(static_cast<Eigen::Index>(i), t - 1);
      const double eps = g.truth.noise(static_cast<Eigen::Index>(i), t - 1);
      CHECK(u >= spec.reward_low);
      CHECK(u < spec.reward_high);
      CHECK(tr.rewards[s] + next_best == doctest::Approx(u + eps + x.dot(env.theta_star(t))));
    }
  }
  for (int t = 1; t <= spec.horizon; ++t) {
    const Vector star = g.truth.targets_star(ds, t);
    CHECK(star.size() == 50);
    const Vector nf = g.truth.targets_noisefree(ds, t, 0.0);
    const Eigen::Index row = 3;
    CHECK(star[row] - nf[row] ==
          doctest::Approx(g.truth.base_rewards(row, t - 1) + g.truth.noise(row, t - 1)));
  }
}

TEST_CASE("generated dataset properties") {
  const auto env = make_env(small_spec(), 1);
  const auto g = generate_trajectories(env, 30, BehaviorPolicy::uniform_random, 2);
  const auto h = generate_trajectories(env, 30, BehaviorPolicy::uniform_random, 2);
  CHECK(g.dataset == h.dataset);
  CHECK(g.dataset.horizon() == 3);
  CHECK(g.dataset.feature_dim() == 8);
  double max_abs = 0.0;
  for (const auto& tr : g.dataset.trajectories()) {
    for (double r : tr.rewards) max_abs = std::max(max_abs, std::abs(r));
    // Video component after an action equals the chosen video.
    for (std::size_t s = 0; s + 1 < tr.states.size(); ++s) {
      CHECK(tr.states[s + 1].tail(2) == env.video_pool().row(tr.actions[s]).transpose());
    }
  }
  const double M = g.dataset.reward_bound();
  CHECK(M >= 1.5);
  CHECK(M >= max_abs);
  CHECK(M == doctest::Approx(std::max(1.5, std::ceil(max_abs * 100) / 100)));
  CHECK_THROWS_AS(generate_trajectories(env, 0), DomainError);
}

TEST_CASE("step matches generation and observe_target") {
  const auto env = make_env(small_spec(), 5);
  Rng rng(mix_seed(9, 0));
  const Vector s0 = env.initial_state(rng);
  const auto action = static_cast<int>(rng.index(5));
  const auto step = env.step(1, s0, action, rng);
  const auto g = generate_trajectories(env, 1, BehaviorPolicy::uniform_random, 9);
  CHECK(g.dataset.trajectory(0).states[0] == s0);
  CHECK(g.dataset.trajectory(0).actions[0] == action);
  CHECK(g.dataset.trajectory(0).rewards[0] == step.reward);
  CHECK_THROWS_AS(env.step(4, s0, 0, rng), IndexError);
  CHECK_THROWS_AS(env.step(1, s0, 5, rng), IndexError);

  // Sample mean of observed targets approaches <x, theta*_t> + E[u].
  auto spec = small_spec();
  spec.noise_sd = 0.5;
  const auto noisy = make_env(spec, 6);
  const Vector x = noisy.features(noisy.state(0, 0), 0);
  Rng r2(1);
  double sum = 0.0;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) sum += observe_target(noisy, x, 2, r2);
  CHECK(std::abs(sum / draws - x.dot(noisy.theta_star(2))) < 0.02);
  // theta*_{T+1} = 0, so the draw does not depend on x.
  Rng ra(3), rb(3);
  CHECK(observe_target(noisy, x, 4, ra) == observe_target(noisy, noisy.features(noisy.state(1, 2), 3), 4, rb));
  CHECK_THROWS_AS(observe_target(noisy, x, 5, r2), IndexError);
  CHECK_THROWS_AS(observe_target(noisy, Vector::Zero(2), 1, r2), ShapeError);
}

TEST_CASE("environment serialization") {
  const auto env = make_env(small_spec(), 12);
  const auto dir = testing::scratch_dir("synth");
  save_env(env, dir / "env.json");
  CHECK(load_env(dir / "env.json") == env);
  CHECK(env_spec_from_json(to_json(env.spec())) == env.spec());
  CHECK(env_from_json(to_json(env)) == env);
  CHECK_THROWS_AS(env_from_json(nlohmann::json::object()), ParseError);
}

#include <gtest/gtest.h>

#include <cmath>

#include "otca/rewards.hpp"

using namespace otca;
using namespace otca::rewards;

TEST(Rewards, Examples) {
  EXPECT_EQ(evaluate({"m", ModeProximity{{1, 1}, 1.0}}, Vec{1, 1}), 0.0);
  EXPECT_EQ(evaluate({"d", DirectionAlignment{{1, 0}}}, Vec{0, 3}), 0.0);
  EXPECT_EQ(evaluate({"n", NormPenalty{2.0}}, Vec{0, 3}), -1.0);
  EXPECT_EQ(evaluate({"d", DirectionAlignment{{1, 0}}}, Vec{0, 0}), 0.0);
  EXPECT_NEAR(evaluate({"d", DirectionAlignment{{1, 1}}}, Vec{2, 2}), 1.0, 1e-15);
  EXPECT_EQ(evaluate({"m", ModeProximity{{0, 0}, 2.0}}, Vec{3, 4}), -2.5);
}

TEST(Rewards, EvaluateAll) {
  EXPECT_TRUE(evaluate_all({}, Vec{1, 2}).empty());
  const std::vector<RewardSpec> pair{{"a", ModeProximity{{1, 0}, 1.0}}, {"b", ModeProximity{{-1, 0}, 1.0}}};
  EXPECT_EQ(evaluate_all(pair, Vec{0, 0}), (Vec{-1, -1}));
  const Vec g = evaluate_all(default_suite(), Vec{1, 2});
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g[0], -0.7071067811865476, 1e-15);
  EXPECT_NEAR(g[1], -2.5495097567963922, 1e-15);
  EXPECT_NEAR(g[2], -0.2360679774997898, 1e-15);
}

TEST(Rewards, Validation) {
  EXPECT_THROW(validate({"d", DirectionAlignment{{0, 0}}}), ConfigError);
  EXPECT_THROW(validate({"m", ModeProximity{{0, 0}, 0.0}}), ConfigError);
  EXPECT_THROW(validate({"m", ModeProximity{{NAN, 0}, 1.0}}), ConfigError);
  EXPECT_THROW(validate({"n", NormPenalty{INFINITY}}), ConfigError);
  EXPECT_NO_THROW(validate({"n", NormPenalty{1.0}}));
  EXPECT_THROW(evaluate({"n", NormPenalty{1.0}}, Vec{NAN, 0}), NumericalError);
  EXPECT_THROW(evaluate({"m", ModeProximity{{0, 0, 0}, 1.0}}, Vec{1, 0}), Error);
}

TEST(Rewards, ModeProximityPeaksAtTarget) {
  const RewardSpec spec{"m", ModeProximity{{0.7, -1.3}, 0.5}};
  double best = -INFINITY;
  Vec arg;
  for (int i = -300; i <= 300; ++i)
    for (int j = -300; j <= 300; ++j) {
      const Vec x{i * 0.01, j * 0.01};
      const double r = evaluate(spec, x);
      if (r > best) {
        best = r;
        arg = x;
      }
    }
  EXPECT_NEAR(arg[0], 0.7, 1e-12);
  EXPECT_NEAR(arg[1], -1.3, 1e-12);
  EXPECT_EQ(evaluate(spec, Vec{0.7, -1.3}), 0.0);
}

TEST(Rewards, DefaultSuiteConflicts) {
  // Every objective in the suite peaks at 0; no grid point gets all three within 1e-3.
  const auto suite = default_suite();
  double closest = INFINITY;
  for (int i = -400; i <= 400; ++i)
    for (int j = -400; j <= 400; ++j) {
      const Vec r = evaluate_all(suite, Vec{i * 0.01, j * 0.01});
      const double gap = std::max({-r[0], -r[1], -r[2]});
      closest = std::min(closest, gap);
    }
  EXPECT_GT(closest, 1e-3);
}

TEST(RewardDelta, GoldenThreeStates) {
  const flow::VelocityNet zero(2, 1, {4});
  tcd::LatentTrajectory traj{{{0, 1}, {1, 1}, {2, 0}}, {1.0, 0.5, 0.0}};
  const Matrix d = reward_delta_profile(traj, flow::bind(zero, 0), default_suite());
  ASSERT_EQ(d.rows(), 2u);
  ASSERT_EQ(d.cols(), 3u);
  const double golden[2][3] = {{0.8740320488976422, -0.9683709267122025, 0.41421356237309515},
                               {-0.8740320488976422, -1.258376796135562, 0.5857864376269049}};
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(d(t, k), golden[t][k], 1e-15);
}

TEST(RewardDelta, FinalTransitionUsesExactFinalState) {
  // u = 1 everywhere: x_hat = z - t, but the last state is scored as is.
  const auto field = [](const Vec& z, double) { return Vec(z.size(), 1.0); };
  tcd::LatentTrajectory traj{{{0.5, 0.5}, {1.0, 2.0}}, {1.0, 0.0}};
  const std::vector<RewardSpec> spec{{"n", NormPenalty{0.0}}};
  const Matrix d = reward_delta_profile(traj, field, spec);
  EXPECT_NEAR(d(0, 0), -std::sqrt(5.0) + std::sqrt(0.5), 1e-15);
}

TEST(RewardDelta, ConstantTrajectoryIsZero) {
  const flow::VelocityNet zero(2, 1, {4});
  tcd::LatentTrajectory traj{{{1, 2}, {1, 2}, {1, 2}, {1, 2}}, {1.0, 0.6, 0.3, 0.0}};
  const Matrix d = reward_delta_profile(traj, flow::bind(zero, 0), default_suite());
  for (double x : d.data()) EXPECT_EQ(x, 0.0);
}

TEST(RewardDelta, ColumnsTelescope) {
  flow::VelocityNet net(2, 1, {8});
  Rng rng(1);
  net.initialize(rng);
  const auto suite = default_suite();
  for (int n = 0; n < 200; ++n) {
    const auto r = flow::sde_sample(net, flow::NoiseSchedule{}, rng.normal_vec(2), 16, rng, 0);
    const Matrix d = reward_delta_profile(r.latent, flow::bind(net, 0), suite);
    const Vec first = evaluate_all(suite, flow::predict_final(flow::bind(net, 0), r.latent.states[0], 1.0));
    const Vec last = evaluate_all(suite, r.latent.final_state());
    for (std::size_t k = 0; k < suite.size(); ++k) {
      double sum = 0.0;
      for (std::size_t t = 0; t < d.rows(); ++t) sum += d(t, k);
      EXPECT_NEAR(sum, last[k] - first[k], 1e-9);
    }
  }
}

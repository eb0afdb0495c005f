#include <gtest/gtest.h>

#include <cmath>

#include "otca/tcd.hpp"

using namespace otca;

namespace {

tcd::LatentTrajectory make(std::vector<Vec> states) {
  tcd::LatentTrajectory t;
  t.timesteps.resize(states.size());
  for (std::size_t j = 0; j < states.size(); ++j)
    t.timesteps[j] = 1.0 - static_cast<double>(j) / static_cast<double>(states.size() - 1);
  t.states = std::move(states);
  return t;
}

void expect_valid_weights(const Vec& w) {
  double s = 0.0;
  for (double x : w) {
    EXPECT_GT(x, 0.0);
    s += x;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

TEST(Similarity, Examples) {
  const auto same = tcd::similarity_profile(make({{1, 2}, {1, 2}, {1, 2}}));
  for (double s : same) EXPECT_NEAR(s, 1.0, 1e-15);

  const auto s = tcd::similarity_profile(make({{0, 1}, {1, 1}, {1, 0}}));
  EXPECT_NEAR(s[0], 0.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s[2], 1.0);

  const auto one_d = tcd::similarity_profile(make({{-1}, {1}}));
  EXPECT_EQ(one_d, (Vec{-1, 1}));
}

TEST(Similarity, Errors) {
  EXPECT_THROW(tcd::similarity_profile(make({{1, 0}, {0, 0}})), NumericalError);
  EXPECT_THROW(tcd::similarity_profile(make({{1, 0}})), Error);
  auto bad = make({{1, 0}, {1, 1}, {1, 2}});
  bad.timesteps = {1.0, 0.5, 0.5};
  EXPECT_THROW(tcd::similarity_profile(bad), Error);
  auto nan = make({{1, 0}, {NAN, 1}});
  EXPECT_THROW(tcd::similarity_profile(nan), NumericalError);
  // A zero intermediate state is unaligned, not an error.
  EXPECT_EQ(tcd::similarity_profile(make({{0, 0}, {1, 0}}))[0], 0.0);
}

TEST(Similarity, ScaleInvariant) {
  Rng rng(1);
  for (int n = 0; n < 500; ++n) {
    std::vector<Vec> st;
    for (int j = 0; j < 5; ++j) st.push_back(rng.normal_vec(3));
    const double c = std::exp(rng.uniform(-4, 4));
    auto scaled = st;
    for (auto& v : scaled)
      for (auto& x : v) x *= c;
    const Vec a = tcd::similarity_profile(make(st));
    const Vec b = tcd::similarity_profile(make(scaled));
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(StepDeltas, Examples) {
  const Vec a = tcd::step_deltas(Vec{0.1, 0.5, 1.0});
  EXPECT_NEAR(a[0], 0.4, 1e-15);
  EXPECT_NEAR(a[1], 0.5, 1e-15);
  EXPECT_EQ(tcd::step_deltas(Vec{0.3, 0.3, 0.3}), (Vec{0, 0}));
  const Vec c = tcd::step_deltas(Vec{0.8, 0.6, 1.0});
  EXPECT_NEAR(c[0], -0.2, 1e-15);
  EXPECT_NEAR(c[1], 0.4, 1e-15);
}

TEST(StepDeltas, OrientationMapsBothWays) {
  // Sampling order: noise (0,1), middle (1,1), final (1,0).
  const Vec s = tcd::similarity_profile(make({{0, 1}, {1, 1}, {1, 0}}));
  const Vec forward = tcd::step_deltas(s);
  // Diffusion-time order puts the final state at index 0.
  const Vec by_diffusion_index{s[2], s[1], s[0]};
  const Vec backward = tcd::step_deltas_diffusion_order(by_diffusion_index);
  // Storage transition j corresponds to diffusion index T - 1 - j.
  ASSERT_EQ(forward.size(), 2u);
  EXPECT_EQ(forward[0], backward[1]);
  EXPECT_EQ(forward[1], backward[0]);
  EXPECT_NEAR(forward[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(forward[1], 1.0 - 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(TemporalWeights, Examples) {
  const Vec a = tcd::temporal_weights(Vec{0.3, 0.3}, 1e-12);
  EXPECT_NEAR(a[0], 0.5, 1e-12);
  EXPECT_NEAR(a[1], 0.5, 1e-12);
  EXPECT_EQ(tcd::temporal_weights(Vec{-1, -1}, 0.2), (Vec{0.5, 0.5}));
  const Vec c = tcd::temporal_weights(Vec{0.2, 0, -0.5}, 0.01);
  EXPECT_NEAR(c[0], 0.9130434782608695, 1e-15);
  EXPECT_NEAR(c[1], 0.04347826086956522, 1e-15);
  EXPECT_NEAR(c[2], 0.04347826086956522, 1e-15);
  EXPECT_THROW(tcd::temporal_weights(Vec{0.1}, 0.0), Error);
}

TEST(TemporalWeights, RandomProfilesNormalized) {
  Rng rng(21);
  for (int n = 0; n < 10000; ++n) {
    const std::size_t t = 1 + rng.index(32);
    Vec ds(t);
    for (auto& x : ds) x = rng.uniform(-1.0, 1.0);
    const double eps = std::exp(rng.uniform(std::log(1e-8), 0.0));
    const Vec w = tcd::temporal_weights(ds, eps);
    expect_valid_weights(w);
    double denom = 0.0;
    for (double x : ds) denom += std::max(0.0, x) + eps;
    for (double x : w) EXPECT_GE(x, eps / denom * (1 - 1e-12));
  }
}

TEST(TemporalWeights, AllNegativeIsUniform) {
  Rng rng(22);
  for (int n = 0; n < 2000; ++n) {
    const std::size_t t = 1 + rng.index(20);
    Vec ds(t);
    for (auto& x : ds) x = rng.uniform(-1.0, 1.0);
    const double shift = *std::max_element(ds.begin(), ds.end()) + 0.01;
    for (auto& x : ds) x -= shift;
    const Vec w = tcd::temporal_weights(ds);
    for (double x : w) EXPECT_NEAR(x, 1.0 / t, 1e-9);
  }
}

TEST(TemporalWeights, RaisingOnePositiveDeltaShiftsMass) {
  Rng rng(23);
  for (int n = 0; n < 2000; ++n) {
    const std::size_t t = 2 + rng.index(10);
    Vec ds(t);
    for (auto& x : ds) x = rng.uniform(-0.5, 1.0);
    const std::size_t j = rng.index(t);
    ds[j] = rng.uniform(0.01, 1.0);
    const Vec before = tcd::temporal_weights(ds);
    ds[j] += rng.uniform(0.01, 0.5);
    const Vec after = tcd::temporal_weights(ds);
    for (std::size_t i = 0; i < t; ++i) {
      if (i == j) {
        EXPECT_GT(after[i], before[i]);
      } else {
        EXPECT_LT(after[i], before[i]);
      }
    }
  }
}

TEST(WeightFloor, Examples) {
  const Vec w{0.9, 0.1};
  EXPECT_EQ(tcd::apply_weight_floor(w, 0.0), w);
  const Vec f = tcd::apply_weight_floor(w, 0.5);
  EXPECT_NEAR(f[0], 0.782608695652174, 1e-15);
  EXPECT_NEAR(f[1], 0.2173913043478261, 1e-15);
  const Vec u = tcd::uniform_weights(4);
  for (double m : {0.1, 0.5, 1.0}) {
    const Vec g = tcd::apply_weight_floor(u, m);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], 0.25, 1e-15);
  }
  EXPECT_THROW(tcd::apply_weight_floor(w, 1.5), Error);
  EXPECT_THROW(tcd::apply_weight_floor(w, -0.1), Error);
}

TEST(WeightFloor, KeepsWeightsOnSimplex) {
  Rng rng(24);
  for (int n = 0; n < 2000; ++n) {
    const std::size_t t = 1 + rng.index(16);
    Vec ds(t);
    for (auto& x : ds) x = rng.uniform(-1.0, 1.0);
    const double m = rng.uniform();
    const Vec w = tcd::apply_weight_floor(tcd::temporal_weights(ds), m);
    expect_valid_weights(w);
  }
}

TEST(WeightEntropy, UniformIsLogT) {
  EXPECT_NEAR(tcd::weight_entropy(tcd::uniform_weights(16)), std::log(16.0), 1e-14);
  EXPECT_EQ(tcd::weight_entropy(Vec{1, 0, 0}), 0.0);
}

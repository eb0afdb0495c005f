#include <gtest/gtest.h>

#include <cmath>

#include "otca/proxy_eval.hpp"

using namespace otca;
using namespace otca::proxy;

namespace {

Vec affine(const Vec& x, double a, double b) {
  Vec y(x);
  for (auto& v : y) v = a * v + b;
  return y;
}

}  // namespace

TEST(PairwiseAgreement, Examples) {
  EXPECT_EQ(pairwise_order_agreement(Vec{1, 2, 3}, Vec{1, 2, 3}), 1.0);
  EXPECT_EQ(pairwise_order_agreement(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}), 0.0);
  EXPECT_NEAR(pairwise_order_agreement(Vec{1, 2, 3}, Vec{1, 3, 2}), 2.0 / 3.0, 1e-15);
  // Ties agree only with ties.
  EXPECT_EQ(pairwise_order_agreement(Vec{1, 1}, Vec{2, 2}), 1.0);
  EXPECT_EQ(pairwise_order_agreement(Vec{1, 1}, Vec{2, 3}), 0.0);
  EXPECT_THROW(pairwise_order_agreement(Vec{1}, Vec{1}), Error);
}

TEST(RecallAtK, Examples) {
  const Vec x{0.1, 0.5, 0.3, 0.9, 0.2};
  for (std::size_t k = 1; k <= 5; ++k) EXPECT_EQ(recall_at_k(x, x, k), 1.0);
  EXPECT_EQ(recall_at_k(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}, 2), 0.0);
  // Top-2 of x is {4, 3}, of y is {4, 0}.
  EXPECT_EQ(recall_at_k(Vec{0, 1, 2, 3, 4}, Vec{3, 0, 1, 2, 4}, 2), 0.5);
  EXPECT_THROW(recall_at_k(x, x, 0), Error);
  EXPECT_THROW(recall_at_k(x, x, 6), Error);
  EXPECT_EQ(top_k_indices(Vec{1, 1, 1}, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(ArgmaxDistance, Examples) {
  EXPECT_EQ(argmax_distance(Vec{1, 3, 2}, Vec{1, 3, 2}), 0u);
  EXPECT_EQ(argmax_distance(Vec{0, 0, 9, 0, 0, 0}, Vec{0, 0, 0, 0, 0, 9}), 3u);
  EXPECT_EQ(argmax_index(Vec{2, 2, 2}), 0u);
  EXPECT_EQ(argmax_distance(Vec{2, 2, 2}, Vec{0, 0, 1}), 2u);
}

TEST(ProxyReport, PerfectOnScaledProfiles) {
  Rng rng(1);
  std::vector<Vec> ds, dr;
  for (int n = 0; n < 50; ++n) {
    ds.push_back(rng.normal_vec(16));
    dr.push_back(affine(ds.back(), 2.0, 0.0));
  }
  const auto r = report_from_profiles(ds, dr);
  EXPECT_EQ(r.pearson.mean, 1.0);
  EXPECT_EQ(r.spearman.mean, 1.0);
  EXPECT_EQ(r.pairwise_agreement.mean, 1.0);
  EXPECT_EQ(r.recall_at_3, 1.0);
  EXPECT_EQ(r.recall_at_5, 1.0);
  EXPECT_EQ(r.argmax_distance_mean, 0.0);
  EXPECT_EQ(r.n_trajectories, 50u);
  EXPECT_EQ(r.n_degenerate, 0u);
}

TEST(ProxyReport, NegatedProfilesAreAntiCorrelated) {
  Rng rng(2);
  std::vector<Vec> ds, dr;
  for (int n = 0; n < 20; ++n) {
    ds.push_back(rng.normal_vec(8));
    dr.push_back(affine(ds.back(), -1.0, 0.0));
  }
  const auto r = report_from_profiles(ds, dr);
  EXPECT_EQ(r.pearson.mean, -1.0);
  EXPECT_EQ(r.spearman.mean, -1.0);
  EXPECT_EQ(r.pairwise_agreement.mean, 0.0);
}

TEST(ProxyReport, ConstantProfilesAreSkippedAndCounted) {
  std::vector<Vec> ds{{1, 2, 3}, {1, 1, 1}, {3, 1, 2}};
  std::vector<Vec> dr{{1, 2, 3}, {0, 1, 2}, {3, 1, 2}};
  const auto r = report_from_profiles(ds, dr);
  EXPECT_EQ(r.n_degenerate, 1u);
  EXPECT_EQ(r.pearson.mean, 1.0);
  EXPECT_EQ(r.pearson.std, 0.0);
  // Recall with k beyond T uses T.
  EXPECT_EQ(r.recall_at_5, (1.0 + 1.0 + 1.0) / 3.0);
  EXPECT_THROW(report_from_profiles({{1, 2}}, {{1, 2}}), Error);
}

TEST(ProxyProperties, InvariantToPositiveAffineMaps) {
  Rng rng(3);
  for (int n = 0; n < 1000; ++n) {
    const std::size_t t = 5 + rng.index(12);
    const Vec x = rng.normal_vec(t), y = rng.normal_vec(t);
    const double a = std::exp(rng.uniform(-2, 2)), b = rng.uniform(-3, 3);
    const Vec xs = affine(x, a, b);
    EXPECT_NEAR(pearson(xs, y), pearson(x, y), 1e-9);
    EXPECT_EQ(spearman(xs, y), spearman(x, y));
    EXPECT_EQ(pairwise_order_agreement(xs, y), pairwise_order_agreement(x, y));
    EXPECT_EQ(recall_at_k(xs, y, 3), recall_at_k(x, y, 3));
    EXPECT_EQ(argmax_distance(xs, y), argmax_distance(x, y));
    EXPECT_EQ(pairwise_order_agreement(x, y), pairwise_order_agreement(y, x));
    for (std::size_t k = 1; k <= t; ++k) EXPECT_EQ(recall_at_k(x, x, k), 1.0);
  }
}

TEST(ProxyReport, AggregationRules) {
  Matrix m(2, 3);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(0, 2) = 6;
  m(1, 0) = -3;
  EXPECT_EQ(aggregate_rows(m, {}), (Vec{3, -1}));
  EXPECT_EQ(aggregate_rows(m, {1}), (Vec{2, 0}));
  EXPECT_THROW(aggregate_rows(m, {3}), Error);
}

TEST(ProxyReport, JsonRecord) {
  std::vector<Vec> ds{{1, 2, 3}, {3, 1, 2}};
  const auto j = to_json(report_from_profiles(ds, ds));
  EXPECT_EQ(j.at("record"), "proxy_report");
  EXPECT_EQ(j.at("pearson").at("mean"), 1.0);
  EXPECT_EQ(j.at("n_trajectories"), 2);
}

TEST(ProxyReport, EndToEndOnRollouts) {
  flow::VelocityNet net(2, 1, {8});
  Rng rng(4);
  net.initialize(rng);
  std::vector<flow::Rollout> rollouts;
  for (int n = 0; n < 10; ++n)
    rollouts.push_back(flow::sde_sample(net, flow::NoiseSchedule{}, rng.normal_vec(2), 16, rng, 0));
  const auto r = proxy_report(rollouts, net, rewards::default_suite());
  EXPECT_EQ(r.n_trajectories, 10u);
  EXPECT_GE(r.pearson.mean, -1.0);
  EXPECT_LE(r.pearson.mean, 1.0);
  EXPECT_GE(r.pairwise_agreement.mean, 0.0);
  EXPECT_LE(r.pairwise_agreement.mean, 1.0);
  EXPECT_LE(r.argmax_distance_mean, 15.0);
}

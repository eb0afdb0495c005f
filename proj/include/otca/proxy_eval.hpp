#pragma once

// How well the alignment gain dS tracks the actual reward gain dR along a
// trajectory: correlation, rank agreement and peak localisation metrics,
// computed per trajectory and then averaged.
//
// Ties are broken by lowest index everywhere (top-k, argmax).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/numerics.hpp"
#include "otca/rewards.hpp"
#include "otca/tcd.hpp"

namespace otca::proxy {

namespace detail {
inline int sign(double x) { return (x > 0.0) - (x < 0.0); }
}  // namespace detail

// Fraction of unordered index pairs ordered the same way in x and y. A pair
// tied in either sequence agrees only if it is tied in both.
inline double pairwise_order_agreement(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("pairwise_order_agreement: need equal lengths >= 2");
  std::size_t agree = 0, pairs = 0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      ++pairs;
      if (detail::sign(x[a] - x[b]) == detail::sign(y[a] - y[b])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

inline std::vector<std::size_t> top_k_indices(std::span<const double> x, std::size_t k) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  idx.resize(k);
  return idx;
}

inline double recall_at_k(std::span<const double> x, std::span<const double> y, std::size_t k) {
  if (x.size() != y.size()) throw Error("recall_at_k: length mismatch");
  if (k < 1 || k > x.size()) throw Error("recall_at_k: need 1 <= k <= T");
  auto tx = top_k_indices(x, k);
  auto ty = top_k_indices(y, k);
  std::sort(tx.begin(), tx.end());
  std::sort(ty.begin(), ty.end());
  std::vector<std::size_t> common;
  std::set_intersection(tx.begin(), tx.end(), ty.begin(), ty.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

inline std::size_t argmax_index(std::span<const double> x) {
  if (x.empty()) throw Error("argmax: empty sequence");
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

inline std::size_t argmax_distance(std::span<const double> x, std::span<const double> y) {
  const std::size_t a = argmax_index(x);
  const std::size_t b = argmax_index(y);
  return a > b ? a - b : b - a;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

struct ProxyReport {
  Summary pearson;
  Summary spearman;
  Summary pairwise_agreement;
  double recall_at_3 = 0.0;
  double recall_at_5 = 0.0;
  double argmax_distance_mean = 0.0;
  std::size_t n_trajectories = 0;
  std::size_t n_degenerate = 0;  // skipped by the correlation metrics
};

inline Summary summarize(std::span<const double> xs) {
  if (xs.empty()) return {std::nan(""), std::nan("")};
  if (xs.size() == 1) return {xs.front(), 0.0};
  const MeanStd ms = mean_std(xs);
  return {ms.mean, ms.std};
}

inline bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Metrics over paired per-trajectory profiles. Recall@k uses min(k, T).
inline ProxyReport report_from_profiles(const std::vector<Vec>& delta_s, const std::vector<Vec>& delta_r) {
  if (delta_s.size() != delta_r.size()) throw Error("proxy_report: profile count mismatch");
  if (delta_s.size() < 2) throw Error("proxy_report: need at least two trajectories");
  ProxyReport rep;
  rep.n_trajectories = delta_s.size();
  Vec pearsons, spearmans, agreements;
  double r3 = 0.0, r5 = 0.0, dist = 0.0;
  for (std::size_t n = 0; n < delta_s.size(); ++n) {
    const Vec& s = delta_s[n];
    const Vec& r = delta_r[n];
    if (s.size() != r.size() || s.size() < 2) throw Error("proxy_report: malformed profile pair");
    agreements.push_back(pairwise_order_agreement(s, r));
    r3 += recall_at_k(s, r, std::min<std::size_t>(3, s.size()));
    r5 += recall_at_k(s, r, std::min<std::size_t>(5, s.size()));
    dist += static_cast<double>(argmax_distance(s, r));
    if (is_constant(s) || is_constant(r)) {
      ++rep.n_degenerate;
      continue;
    }
    pearsons.push_back(pearson(s, r));
    spearmans.push_back(spearman(s, r));
  }
  const double count = static_cast<double>(delta_s.size());
  rep.pearson = summarize(pearsons);
  rep.spearman = summarize(spearmans);
  rep.pairwise_agreement = summarize(agreements);
  rep.recall_at_3 = r3 / count;
  rep.recall_at_5 = r5 / count;
  rep.argmax_distance_mean = dist / count;
  return rep;
}

// How the K reward deltas of a transition collapse to one value. `objective`
// selects a single column when set; otherwise the unweighted mean is used.
struct AggregateRule {
  std::optional<std::size_t> objective;
};

inline Vec aggregate_rows(const Matrix& delta_r, const AggregateRule& rule) {
  Vec out(delta_r.rows());
  for (std::size_t t = 0; t < delta_r.rows(); ++t) {
    if (rule.objective) {
      if (*rule.objective >= delta_r.cols()) throw Error("proxy_report: objective index out of range");
      out[t] = delta_r(t, *rule.objective);
    } else {
      const auto row = delta_r.row(t);
      out[t] = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    }
  }
  return out;
}

inline ProxyReport proxy_report(const std::vector<flow::Rollout>& rollouts, const flow::VelocityNet& net,
                                const std::vector<rewards::RewardSpec>& specs,
                                const AggregateRule& rule = {}) {
  std::vector<Vec> ds, dr;
  ds.reserve(rollouts.size());
  dr.reserve(rollouts.size());
  for (const auto& r : rollouts) {
    ds.push_back(tcd::step_deltas(tcd::similarity_profile(r.latent)));
    dr.push_back(aggregate_rows(rewards::reward_delta_profile(r.latent, flow::bind(net, r.label), specs), rule));
  }
  return report_from_profiles(ds, dr);
}

inline nlohmann::json to_json(const ProxyReport& r) {
  auto summary = [](const Summary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  return {{"record", "proxy_report"},
          {"pearson", summary(r.pearson)},
          {"spearman", summary(r.spearman)},
          {"pairwise_agreement", summary(r.pairwise_agreement)},
          {"recall_at_3", r.recall_at_3},
          {"recall_at_5", r.recall_at_5},
          {"argmax_distance_mean", r.argmax_distance_mean},
          {"n_trajectories", r.n_trajectories},
          {"n_degenerate", r.n_degenerate}};
}

}  // namespace otca::proxy

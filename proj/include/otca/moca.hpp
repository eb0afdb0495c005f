#pragma once

// Multi-objective credit allocation: per-sample simplex weights over the K
// objective advantages, from the exploration-biased min-norm problem
//
//   min_c (c.A)^2 - lambda * (c.A)   s.t.  c >= 0, sum(c) = 1.
//
// Because the objective depends on c only through z = c.A, and the simplex
// maps onto [min A, max A], the problem reduces to a clipped 1-D quadratic
// followed by a two-point interpolation between neighbouring advantages.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "otca/error.hpp"
#include "otca/numerics.hpp"

namespace otca::moca {

// Default tolerance for the closed-form solver's equality tests.
inline constexpr double kSolverTolerance = 1e-8;
// Default divide guard for the exploration signal and bias strength.
inline constexpr double kExplorationEps = 1e-6;

struct ExplorationSignal {
  double q = 0.0;       // weighted structural contribution sum_t w_t dS_t
  double e = 0.0;       // |q| / (std of group q + eps)
  double lambda = 0.0;  // bias strength, in [0, 1)
};

// sum_t w_t * dS_t.
inline double structural_score(std::span<const double> temporal_weights,
                               std::span<const double> delta_s) {
  if (temporal_weights.size() != delta_s.size())
    throw Error("structural_score: weights and deltas differ in length");
  return dot(temporal_weights, delta_s);
}

// q for this sample and e = |q| / (popstd(group_q) + eps). `group_q` holds the
// scores of every sample in the group, this one included.
inline ExplorationSignal exploration_signal(std::span<const double> temporal_weights,
                                            std::span<const double> delta_s,
                                            std::span<const double> group_q, double eps) {
  if (group_q.size() < 2) throw Error("exploration_signal: group size < 2");
  if (!(eps > 0.0)) throw Error("exploration_signal: eps must be positive");
  ExplorationSignal sig;
  sig.q = structural_score(temporal_weights, delta_s);
  sig.e = std::abs(sig.q) / (mean_std(group_q).std + eps);
  return sig;
}

// max(0, sum A) / (|sum A| + eps) * tanh(e).
inline double exploration_lambda(std::span<const double> advantages, double e, double eps) {
  if (!(eps > 0.0)) throw Error("exploration_lambda: eps must be positive");
  const double sum = std::accumulate(advantages.begin(), advantages.end(), 0.0);
  return std::max(0.0, sum) / (std::abs(sum) + eps) * std::tanh(e);
}

// Which branch of the closed-form solver produced a coefficient vector.
enum class SolveCase { kAllEqual = 1, kVertex = 2, kInterpolated = 3 };

struct Solution {
  Vec coefficients;
  double z = 0.0;  // c.A
  SolveCase which = SolveCase::kAllEqual;
};

inline double biased_objective(double z, double lambda) { return z * z - lambda * z; }

// Closed-form solver. Ties (equal maxima, several advantages within tolerance
// of the target) resolve to the lowest index; a target sitting exactly on a
// shared bracket boundary uses the lower bracket.
inline Solution solve(std::span<const double> advantages, double lambda,
                      double tol = kSolverTolerance) {
  const std::size_t k = advantages.size();
  if (k == 0) throw Error("moca: empty advantage vector");
  if (!all_finite(advantages)) throw NumericalError("moca: non-finite advantage");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("moca: lambda must be finite and >= 0");
  if (!(tol > 0.0)) throw Error("moca: tolerance must be positive");

  Solution sol;
  sol.coefficients.assign(k, 0.0);

  const auto [lo_it, hi_it] = std::minmax_element(advantages.begin(), advantages.end());
  const double s_min = *lo_it;
  const double s_max = *hi_it;

  if (s_max - s_min < tol) {
    // max_element returns the first maximum.
    const auto best = static_cast<std::size_t>(
        std::max_element(advantages.begin(), advantages.end()) - advantages.begin());
    sol.coefficients[best] = 1.0;
    sol.z = advantages[best];
    sol.which = SolveCase::kAllEqual;
    return sol;
  }

  const double z_hat = std::clamp(lambda / 2.0, s_min, s_max);

  for (std::size_t i = 0; i < k; ++i) {
    if (std::abs(advantages[i] - z_hat) < tol) {
      sol.coefficients[i] = 1.0;
      sol.z = advantages[i];
      sol.which = SolveCase::kVertex;
      return sol;
    }
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return advantages[a] < advantages[b]; });

  for (std::size_t j = 0; j + 1 < k; ++j) {
    const double lower = advantages[order[j]];
    const double upper = advantages[order[j + 1]];
    if (lower <= z_hat && z_hat <= upper) {
      const double span = upper - lower;
      sol.coefficients[order[j]] = (upper - z_hat) / span;
      sol.coefficients[order[j + 1]] = (z_hat - lower) / span;
      sol.z = sol.coefficients[order[j]] * lower + sol.coefficients[order[j + 1]] * upper;
      sol.which = SolveCase::kInterpolated;
      return sol;
    }
  }
  // z_hat lies in [s_min, s_max] and is not within tol of any endpoint, so a
  // bracket always exists.
  throw NumericalError("moca: no bracket found");
}

inline Vec moca_solve(std::span<const double> advantages, double lambda,
                      double tol = kSolverTolerance) {
  return solve(advantages, lambda, tol).coefficients;
}

struct OracleResult {
  double z = 0.0;
  double objective = 0.0;
};

// Exhaustive scan of z^2 - lambda z over a uniform grid of the simplex image
// [min A, max A] (endpoints included). Used to check the closed form.
inline OracleResult brute_force_oracle(std::span<const double> advantages, double lambda,
                                       double resolution) {
  if (advantages.empty()) throw Error("brute_force_oracle: empty advantage vector");
  if (!(resolution > 0.0)) throw Error("brute_force_oracle: resolution must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(advantages.begin(), advantages.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / resolution));
  OracleResult best{lo, biased_objective(lo, lambda)};
  for (std::size_t i = 1; i <= n; ++i) {
    const double z = std::min(hi, lo + static_cast<double>(i) * resolution);
    const double obj = biased_objective(z, lambda);
    if (obj < best.objective) best = {z, obj};
  }
  return best;
}

}  // namespace otca::moca

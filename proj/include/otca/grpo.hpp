#pragma once

// Group-relative advantages, credit-assigned effective advantages and the
// clipped policy surrogate with its exact parameter gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/moca.hpp"
#include "otca/numerics.hpp"
#include "otca/tcd.hpp"

namespace otca::grpo {

// G rollouts sharing one condition, with their G x K raw rewards.
struct SampleGroup {
  std::vector<flow::Rollout> rollouts;
  Matrix rewards;
};

struct NormalizedAdvantages {
  Matrix values;                         // G x K
  std::vector<bool> degenerate_columns;  // zero-variance objectives (set to 0)
  bool any_degenerate() const {
    return std::find(degenerate_columns.begin(), degenerate_columns.end(), true) !=
           degenerate_columns.end();
  }
};

// Per objective: (r - mean) / popstd across the group.
inline NormalizedAdvantages normalize_advantages(const Matrix& rewards) {
  if (rewards.rows() < 2) throw Error("normalize_advantages: group size < 2");
  if (!all_finite(rewards.data())) throw NumericalError("normalize_advantages: non-finite reward");
  NormalizedAdvantages out{Matrix(rewards.rows(), rewards.cols()),
                           std::vector<bool>(rewards.cols(), false)};
  for (std::size_t k = 0; k < rewards.cols(); ++k) {
    const Vec col = rewards.column(k);
    const MeanStd ms = mean_std(col);
    // Relative threshold so columns that differ only by rounding count as constant.
    if (!(ms.std > 1e-12 * std::max(1.0, std::abs(ms.mean)))) {
      out.degenerate_columns[k] = true;
      continue;
    }
    for (std::size_t i = 0; i < rewards.rows(); ++i) out.values(i, k) = (col[i] - ms.mean) / ms.std;
  }
  return out;
}

// A_eff[i][t] = w[i][t] * sum_k c[i][k] adv[i][k].
inline Matrix effective_advantages(const Matrix& adv, const std::vector<Vec>& coeffs,
                                   const std::vector<Vec>& weights) {
  if (coeffs.size() != adv.rows() || weights.size() != adv.rows())
    throw Error("effective_advantages: group size mismatch");
  if (weights.empty()) return {};
  const std::size_t steps = weights.front().size();
  Matrix out(adv.rows(), steps);
  for (std::size_t i = 0; i < adv.rows(); ++i) {
    if (coeffs[i].size() != adv.cols()) throw Error("effective_advantages: objective count mismatch");
    if (weights[i].size() != steps) throw Error("effective_advantages: step count mismatch");
    const double fused = dot(coeffs[i], adv.row(i));
    for (std::size_t t = 0; t < steps; ++t) out(i, t) = weights[i][t] * fused;
  }
  return out;
}

enum class ClipMode {
  kHalfWidth,   // min(rho A, clip(rho, 1 - eps, 1 + eps) A)
  kRatioFloor,  // max(rho, eps) A
};

struct ClipConfig {
  ClipMode mode = ClipMode::kHalfWidth;
  double eps = 1e-4;
};

struct CellTerm {
  double value = 0.0;
  bool passes_gradient = false;  // true when d value / d rho = A
};

inline CellTerm surrogate_cell(double rho, double advantage, const ClipConfig& clip) {
  if (clip.mode == ClipMode::kRatioFloor) {
    if (rho >= clip.eps) return {rho * advantage, true};
    return {clip.eps * advantage, false};
  }
  const double clipped = std::clamp(rho, 1.0 - clip.eps, 1.0 + clip.eps);
  const double raw = rho * advantage;
  const double bounded = clipped * advantage;
  if (clipped == rho || raw < bounded) return {raw, true};
  return {bounded, false};
}

// Mean over (i, t) of the clipped terms with rho = exp(new_logp - old_logp).
inline double clipped_surrogate(const Matrix& eff, const Matrix& new_logp, const Matrix& old_logp,
                                const ClipConfig& clip) {
  if (!(clip.eps > 0.0)) throw Error("clipped_surrogate: clip eps must be positive");
  if (new_logp.rows() != eff.rows() || new_logp.cols() != eff.cols() ||
      old_logp.rows() != eff.rows() || old_logp.cols() != eff.cols())
    throw Error("clipped_surrogate: shape mismatch");
  if (!all_finite(new_logp.data()) || !all_finite(old_logp.data()))
    throw NumericalError("clipped_surrogate: non-finite log-density");
  double total = 0.0;
  for (std::size_t i = 0; i < eff.rows(); ++i)
    for (std::size_t t = 0; t < eff.cols(); ++t)
      total += surrogate_cell(std::exp(new_logp(i, t) - old_logp(i, t)), eff(i, t), clip).value;
  return total / static_cast<double>(eff.rows() * eff.cols());
}

// Log-densities recorded at sampling time (the old policy), G x T.
inline Matrix recorded_log_densities(const SampleGroup& group) {
  if (group.rollouts.empty()) return {};
  Matrix out(group.rollouts.size(), group.rollouts.front().steps.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const auto& steps = group.rollouts[i].steps;
    if (steps.size() != out.cols()) throw Error("sample group: rollouts differ in length");
    for (std::size_t t = 0; t < steps.size(); ++t) {
      if (!steps[t].stochastic) throw Error("sample group: deterministic step has no density");
      out(i, t) = steps[t].log_density;
    }
  }
  return out;
}

inline Matrix current_log_densities(const SampleGroup& group, const flow::VelocityNet& net) {
  Matrix out(group.rollouts.size(), group.rollouts.empty() ? 0 : group.rollouts.front().steps.size());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t t = 0; t < out.cols(); ++t)
      out(i, t) = flow::step_log_density_value(group.rollouts[i].steps[t], net);
  return out;
}

struct SurrogateGradient {
  double value = 0.0;
  Vec grad;
};

// Value and exact parameter gradient of the clipped surrogate at the
// network's current parameters. Cells whose clip branch binds contribute no
// gradient. Summation order is fixed (sample-major, then step).
inline SurrogateGradient surrogate_gradient(const SampleGroup& group, const Matrix& eff,
                                            const flow::VelocityNet& net, const ClipConfig& clip) {
  if (!(clip.eps > 0.0)) throw Error("surrogate_gradient: clip eps must be positive");
  if (eff.rows() != group.rollouts.size()) throw Error("surrogate_gradient: group size mismatch");
  SurrogateGradient out;
  out.grad.assign(net.parameter_count(), 0.0);
  const double cells = static_cast<double>(eff.rows() * eff.cols());
  for (std::size_t i = 0; i < eff.rows(); ++i) {
    const auto& steps = group.rollouts[i].steps;
    if (steps.size() != eff.cols()) throw Error("surrogate_gradient: step count mismatch");
    for (std::size_t t = 0; t < eff.cols(); ++t) {
      const auto& step = steps[t];
      if (!step.stochastic) throw Error("surrogate_gradient: deterministic step has no density");
      const flow::LogDensity ld = flow::step_log_density(step, net);
      const double rho = std::exp(ld.value - step.log_density);
      if (!std::isfinite(rho)) throw NumericalError("surrogate_gradient: non-finite ratio");
      const CellTerm term = surrogate_cell(rho, eff(i, t), clip);
      out.value += term.value;
      if (term.passes_gradient && eff(i, t) != 0.0) {
        const double scale = eff(i, t) * rho / cells;
        for (std::size_t p = 0; p < out.grad.size(); ++p) out.grad[p] += scale * ld.grad[p];
      }
    }
  }
  out.value /= cells;
  return out;
}

struct OtcaConfig {
  double tcd_eps = tcd::kDefaultEps;
  double moca_tolerance = moca::kSolverTolerance;
  double exploration_eps = moca::kExplorationEps;
  double w_min = 0.0;
  bool uniform_w = false;    // bypass temporal credit (w = 1/T)
  bool uniform_c = false;    // bypass objective fusion (c = 1/K)
  bool exploration = true;   // lambda from the exploration signal, else 0
};

struct SampleDiagnostics {
  double q = 0.0;
  double e = 0.0;
  double lambda = 0.0;
  Vec coefficients;
  Vec weights;
  Vec delta_s;
  double weight_entropy = 0.0;
};

struct OtcaResult {
  NormalizedAdvantages advantages;
  Matrix effective;  // G x T
  std::vector<SampleDiagnostics> samples;
};

// Temporal credit, exploration signal, objective fusion and effective
// advantage for one group.
inline OtcaResult otca_step(const std::vector<tcd::LatentTrajectory>& trajectories,
                            const Matrix& rewards, const OtcaConfig& config) {
  const std::size_t g = trajectories.size();
  if (g < 2) throw Error("otca_step: group size < 2");
  if (rewards.rows() != g) throw Error("otca_step: reward rows != group size");
  if (rewards.cols() == 0) throw Error("otca_step: no objectives");

  OtcaResult result;
  result.advantages = normalize_advantages(rewards);
  const Matrix& adv = result.advantages.values;
  result.samples.resize(g);

  const std::size_t steps = trajectories.front().transitions();
  Vec group_q(g);
  for (std::size_t i = 0; i < g; ++i) {
    if (trajectories[i].transitions() != steps) throw Error("otca_step: trajectories differ in length");
    auto& s = result.samples[i];
    s.delta_s = tcd::step_deltas(tcd::similarity_profile(trajectories[i]));
    s.weights = config.uniform_w
                    ? tcd::uniform_weights(steps)
                    : tcd::apply_weight_floor(tcd::temporal_weights(s.delta_s, config.tcd_eps),
                                              config.w_min);
    s.weight_entropy = tcd::weight_entropy(s.weights);
    s.q = moca::structural_score(s.weights, s.delta_s);
    group_q[i] = s.q;
  }

  const std::size_t k = rewards.cols();
  std::vector<Vec> coeffs(g), weights(g);
  for (std::size_t i = 0; i < g; ++i) {
    auto& s = result.samples[i];
    s.e = moca::exploration_signal(s.weights, s.delta_s, group_q, config.exploration_eps).e;
    s.lambda = config.exploration ? moca::exploration_lambda(adv.row(i), s.e, config.exploration_eps)
                                  : 0.0;
    s.coefficients = config.uniform_c ? Vec(k, 1.0 / static_cast<double>(k))
                                      : moca::moca_solve(adv.row(i), s.lambda, config.moca_tolerance);
    coeffs[i] = s.coefficients;
    weights[i] = s.weights;
  }
  result.effective = effective_advantages(adv, coeffs, weights);
  return result;
}

inline OtcaResult otca_step(const SampleGroup& group, const OtcaConfig& config) {
  std::vector<tcd::LatentTrajectory> trajs;
  trajs.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) trajs.push_back(r.latent);
  return otca_step(trajs, group.rewards, config);
}

}  // namespace otca::grpo

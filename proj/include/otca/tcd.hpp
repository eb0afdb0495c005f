#pragma once

// Trajectory-level credit decomposition: per-transition weights from how much
// each denoising step increases the cosine alignment of the latent with the
// final sample.
//
// Trajectories are stored in sampling order (noise first, final sample last),
// so transition j maps states[j] -> states[j+1] and its alignment gain is
// S[j+1] - S[j]. In the diffusion-time convention (index T is pure noise,
// index 0 is the final sample) the same quantity is written S_t - S_{t+1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "otca/error.hpp"
#include "otca/numerics.hpp"

namespace otca::tcd {

inline constexpr double kDefaultEps = 1e-4;

// States z at each recorded step (last entry is the final sample) and their
// continuous times.
struct LatentTrajectory {
  std::vector<Vec> states;
  Vec timesteps;

  std::size_t transitions() const { return states.empty() ? 0 : states.size() - 1; }
  const Vec& final_state() const { return states.back(); }
};

inline void validate(const LatentTrajectory& traj) {
  if (traj.states.size() < 2) throw Error("trajectory needs at least two states");
  if (traj.timesteps.size() != traj.states.size())
    throw Error("trajectory timesteps and states differ in length");
  const std::size_t d = traj.states.front().size();
  for (const auto& s : traj.states) {
    if (s.size() != d) throw Error("trajectory states differ in dimension");
    if (!all_finite(s)) throw NumericalError("trajectory contains non-finite state");
  }
  const bool increasing = traj.timesteps[1] > traj.timesteps[0];
  for (std::size_t i = 1; i < traj.timesteps.size(); ++i) {
    const bool ok = increasing ? traj.timesteps[i] > traj.timesteps[i - 1]
                               : traj.timesteps[i] < traj.timesteps[i - 1];
    if (!ok) throw Error("trajectory timesteps must be strictly monotone");
  }
}

// S_j = cos(z_j, z_final) for every stored state.
inline Vec similarity_profile(const LatentTrajectory& traj) {
  validate(traj);
  const Vec& final_state = traj.final_state();
  if (!(norm(final_state) > 0.0)) throw NumericalError("degenerate trajectory");
  Vec s(traj.states.size());
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    // A zero intermediate latent carries no direction; treat it as unaligned.
    s[j] = norm(traj.states[j]) > 0.0 ? cosine_similarity(traj.states[j], final_state) : 0.0;
  }
  s.back() = 1.0;
  return s;
}

// dS_j = S[j+1] - S[j] in storage order.
inline Vec step_deltas(std::span<const double> similarity) {
  if (similarity.size() < 2) throw Error("step_deltas: need at least two similarities");
  Vec d(similarity.size() - 1);
  for (std::size_t j = 0; j + 1 < similarity.size(); ++j) d[j] = similarity[j + 1] - similarity[j];
  return d;
}

// Diffusion-time indexing: element t of the input is the state at diffusion
// index t (0 = final, T = noise), output element t is S_t - S_{t+1}.
inline Vec step_deltas_diffusion_order(std::span<const double> similarity_by_diffusion_index) {
  if (similarity_by_diffusion_index.size() < 2)
    throw Error("step_deltas: need at least two similarities");
  Vec d(similarity_by_diffusion_index.size() - 1);
  for (std::size_t t = 0; t + 1 < similarity_by_diffusion_index.size(); ++t)
    d[t] = similarity_by_diffusion_index[t] - similarity_by_diffusion_index[t + 1];
  return d;
}

// w_j = (max(0, dS_j) + eps) / sum_k (max(0, dS_k) + eps).
inline Vec temporal_weights(std::span<const double> delta_s, double eps = kDefaultEps) {
  if (!(eps > 0.0)) throw Error("temporal_weights: eps must be positive");
  if (delta_s.empty()) throw Error("temporal_weights: empty profile");
  Vec w(delta_s.size());
  double total = 0.0;
  for (std::size_t j = 0; j < delta_s.size(); ++j) {
    w[j] = std::max(0.0, delta_s[j]) + eps;
    total += w[j];
  }
  for (auto& x : w) x /= total;
  return w;
}

inline Vec uniform_weights(std::size_t transitions) {
  return Vec(transitions, 1.0 / static_cast<double>(transitions));
}

// Floors every weight at w_min / T (equivalently T*w_j >= w_min) and
// renormalizes. w_min = 0 disables the floor.
inline Vec apply_weight_floor(std::span<const double> weights, double w_min) {
  if (!(w_min >= 0.0)) throw Error("apply_weight_floor: w_min must be >= 0");
  if (w_min > 1.0) throw Error("apply_weight_floor: w_min > 1 is infeasible");
  Vec out(weights.begin(), weights.end());
  if (w_min == 0.0) return out;
  const double floor = w_min / static_cast<double>(weights.size());
  double total = 0.0;
  for (auto& x : out) {
    x = std::max(x, floor);
    total += x;
  }
  for (auto& x : out) x /= total;
  return out;
}

// Shannon entropy of a weight vector (nats).
inline double weight_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double w : weights)
    if (w > 0.0) h -= w * std::log(w);
  return h;
}

}  // namespace otca::tcd

#pragma once

// Synthetic reward objectives over generated samples. They are cheap,
// differentiable-free oracles that deliberately disagree with each other so
// the multi-objective fusion has something to resolve.

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/numerics.hpp"
#include "otca/tcd.hpp"

namespace otca::rewards {

// -|x - target| / scale
struct ModeProximity {
  Vec target;
  double scale = 1.0;
};

// cos(x, axis); 0 at x = 0
struct DirectionAlignment {
  Vec axis;
};

// -| |x| - radius |
struct NormPenalty {
  double radius = 1.0;
};

struct RewardSpec {
  std::string name;
  std::variant<ModeProximity, DirectionAlignment, NormPenalty> kind;
};

inline void validate(const RewardSpec& spec) {
  if (const auto* m = std::get_if<ModeProximity>(&spec.kind)) {
    if (!all_finite(m->target) || !(m->scale > 0.0) || !std::isfinite(m->scale))
      throw ConfigError("reward '" + spec.name + "': invalid mode_proximity parameters");
  } else if (const auto* a = std::get_if<DirectionAlignment>(&spec.kind)) {
    if (!all_finite(a->axis) || !(norm(a->axis) > 0.0))
      throw ConfigError("reward '" + spec.name + "': axis must be finite and nonzero");
  } else if (const auto* n = std::get_if<NormPenalty>(&spec.kind)) {
    if (!std::isfinite(n->radius)) throw ConfigError("reward '" + spec.name + "': invalid radius");
  }
}

inline double evaluate(const RewardSpec& spec, std::span<const double> x) {
  if (!all_finite(x)) throw NumericalError("reward: non-finite sample");
  struct Visitor {
    std::span<const double> x;
    double operator()(const ModeProximity& m) const {
      if (m.target.size() != x.size()) throw Error("reward: target dimension mismatch");
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - m.target[i]) * (x[i] - m.target[i]);
      return -std::sqrt(r2) / m.scale;
    }
    double operator()(const DirectionAlignment& a) const {
      if (a.axis.size() != x.size()) throw Error("reward: axis dimension mismatch");
      if (!(norm(x) > 0.0)) return 0.0;
      return cosine_similarity(x, a.axis);
    }
    double operator()(const NormPenalty& n) const { return -std::abs(norm(x) - n.radius); }
  };
  return std::visit(Visitor{x}, spec.kind);
}

inline Vec evaluate_all(const std::vector<RewardSpec>& specs, std::span<const double> x) {
  Vec out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(evaluate(s, x));
  return out;
}

// Two conflicting mode targets plus a norm objective that partially agrees
// with both.
inline std::vector<RewardSpec> default_suite() {
  return {
      {"mode_right", ModeProximity{{1.5, 1.5}, 1.0}},
      {"mode_left", ModeProximity{{-1.5, 1.5}, 1.0}},
      {"ring", NormPenalty{2.0}},
  };
}

// Reward change per transition, evaluated on the clean prediction of each
// state (the exact final sample for the last state). Row j is transition
// states[j] -> states[j+1]; column k is objective k.
template <flow::VelocityField F>
Matrix reward_delta_profile(const tcd::LatentTrajectory& traj, const F& field,
                            const std::vector<RewardSpec>& specs) {
  tcd::validate(traj);
  const std::size_t n = traj.states.size();
  std::vector<Vec> per_state(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec x = (j + 1 == n) ? traj.states[j]
                               : flow::predict_final(field, traj.states[j], traj.timesteps[j]);
    per_state[j] = evaluate_all(specs, x);
  }
  Matrix delta(n - 1, specs.size());
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t k = 0; k < specs.size(); ++k)
      delta(j, k) = per_state[j + 1][k] - per_state[j][k];
  return delta;
}

}  // namespace otca::rewards

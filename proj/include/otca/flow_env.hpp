#pragma once

// Desk-scale flow-matching policy. A small MLP velocity field u(z, t, label)
// over d-dimensional data, trained on the rectified interpolant
//   z_t = (1 - t) x + t eps,   u* = eps - x,
// and sampled from t = 1 (noise) to t = 0 (data) either with the Euler ODE
// step or with an Euler-Maruyama step of the reverse-time SDE whose score is
// obtained in closed form from the one-step clean prediction x_hat = z - t u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <concepts>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otca/error.hpp"
#include "otca/numerics.hpp"
#include "otca/optim.hpp"
#include "otca/tcd.hpp"

namespace otca::flow {

enum class NoiseForm {
  kScaled,    // eta * sqrt(t / (1 - t + delta)), capped
  kConstant,  // eta
};

// Linear (rectified) schedule alpha_t = 1 - t, sigma_t = t, plus the SDE
// noise level eps_t.
struct NoiseSchedule {
  double eta = 0.3;
  NoiseForm form = NoiseForm::kScaled;
  double cap = 1.0;
  double delta = 1e-3;

  static double alpha(double t) { return 1.0 - t; }
  static double sigma(double t) { return t; }

  double noise_level(double t) const {
    if (eta == 0.0) return 0.0;
    if (form == NoiseForm::kConstant) return eta;
    return std::min(cap, eta * std::sqrt(t / (1.0 - t + delta)));
  }
};

// Uniform grid t_j = 1 - j/T, j = 0..T.
inline Vec time_grid(int steps) {
  if (steps < 1) throw Error("time grid needs at least one step");
  Vec t(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) t[j] = 1.0 - static_cast<double>(j) / steps;
  t.back() = 0.0;
  return t;
}

// Fully connected tanh network (z, t, one-hot label) -> u. Parameters live in
// one flat vector: for each layer the row-major weight matrix, then the bias.
class VelocityNet {
 public:
  VelocityNet() = default;
  VelocityNet(std::size_t dim, std::size_t conditions, std::vector<std::size_t> hidden)
      : dim_(dim), conditions_(conditions), hidden_(std::move(hidden)) {
    if (dim_ == 0) throw Error("VelocityNet: dim must be positive");
    widths_.push_back(dim_ + 1 + conditions_);
    for (auto h : hidden_) {
      if (h == 0) throw Error("VelocityNet: hidden width must be positive");
      widths_.push_back(h);
    }
    widths_.push_back(dim_);
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += widths_[l + 1] * (widths_[l] + 1);
    params_.assign(n, 0.0);
  }

  std::size_t dim() const { return dim_; }
  std::size_t conditions() const { return conditions_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // Xavier-style uniform initialisation of weights, zero biases.
  void initialize(Rng& rng) {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      for (std::size_t i = 0; i < in * out; ++i) params_[off + i] = rng.uniform(-bound, bound);
      off += in * out;
      for (std::size_t i = 0; i < out; ++i) params_[off + i] = 0.0;
      off += out;
    }
  }

  struct Cache {
    std::vector<Vec> activations;  // input, hidden outputs..., output
  };

  Vec input_features(std::span<const double> z, double t, std::size_t label) const {
    if (z.size() != dim_) throw Error("VelocityNet: latent dimension mismatch");
    if (conditions_ > 0 && label >= conditions_) throw Error("VelocityNet: label out of range");
    Vec in(widths_.front(), 0.0);
    std::copy(z.begin(), z.end(), in.begin());
    in[dim_] = t;
    if (conditions_ > 0) in[dim_ + 1 + label] = 1.0;
    return in;
  }

  Vec forward(std::span<const double> z, double t, std::size_t label, Cache* cache = nullptr) const {
    Vec a = input_features(z, t, label);
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    std::size_t off = 0;
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = params_.data() + off;
      const double* b = w + in * out;
      Vec next(out);
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * a[i];
        next[o] = (l + 1 < layers) ? std::tanh(s) : s;
      }
      off += in * out + out;
      a = std::move(next);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  // Accumulates d(grad_out . u)/d(params) into `grad` using the activations
  // recorded by forward().
  void backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw Error("VelocityNet: gradient size mismatch");
    if (cache.activations.size() != widths_.size()) throw Error("VelocityNet: stale cache");
    const std::size_t layers = widths_.size() - 1;
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = off;
      off += widths_[l + 1] * (widths_[l] + 1);
    }
    Vec delta(grad_out.begin(), grad_out.end());  // d/d(pre-activation) of layer l
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const Vec& a_in = cache.activations[l];
      const double* w = params_.data() + offsets[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + in * out;
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * a_in[i];
      }
      if (l == 0) break;
      Vec prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) prev[i] += w[o * in + i] * delta[o];
      // a_in = tanh(pre) for hidden layers.
      for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a_in[i] * a_in[i];
      delta = std::move(prev);
    }
  }

 private:
  std::size_t dim_ = 0;
  std::size_t conditions_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<std::size_t> widths_;
  std::vector<double> params_;
};

// Any callable (z, t) -> u.
template <typename F>
concept VelocityField = requires(const F& f, const Vec& z, double t) {
  { f(z, t) } -> std::convertible_to<Vec>;
};

// Binds a network to one conditioning label.
inline auto bind(const VelocityNet& net, std::size_t label) {
  return [&net, label](const Vec& z, double t) { return net.forward(z, t, label); };
}

// One stochastic (or, with zero noise, deterministic) transition.
struct SampledStep {
  Vec state_before;
  Vec state_after;
  Vec action_noise;
  Vec mean;
  double std = 0.0;
  double log_density = 0.0;  // meaningful only when stochastic
  double t = 0.0;            // time of state_before
  double dt = 0.0;           // positive step length; state_after is at t - dt
  double noise_level = 0.0;  // eps_t used for the score correction
  std::size_t label = 0;
  bool stochastic = false;
};

struct Rollout {
  tcd::LatentTrajectory latent;
  std::vector<SampledStep> steps;
  std::size_t label = 0;
};

inline double gaussian_log_density(std::span<const double> x, std::span<const double> mean, double std) {
  const double d = static_cast<double>(x.size());
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - mean[i]) * (x[i] - mean[i]);
  return -0.5 * d * std::log(2.0 * M_PI * std * std) - 0.5 * r2 / (std * std);
}

// Score correction coefficient eps_t^2 / (2 t); with the closed-form score
// -(z + (1 - t) u) / t the reverse-time drift is u + coef (z + (1 - t) u).
inline double score_coefficient(double noise_level, double t) {
  if (noise_level == 0.0) return 0.0;
  if (!(t > 0.0)) throw NumericalError("score evaluated at t = 0");
  return noise_level * noise_level / (2.0 * t);
}

inline Vec sde_mean(std::span<const double> z, std::span<const double> u, double t, double dt,
                    double coef) {
  Vec mean(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double drift = coef == 0.0 ? u[i] : u[i] + coef * (z[i] + (1.0 - t) * u[i]);
    mean[i] = z[i] - dt * drift;
  }
  return mean;
}

template <VelocityField F>
SampledStep sde_step(const F& field, const NoiseSchedule& schedule, const Vec& z, double t,
                     double dt, Rng& rng) {
  SampledStep step;
  step.state_before = z;
  step.t = t;
  step.dt = dt;
  step.noise_level = schedule.noise_level(t);
  const Vec u = field(z, t);
  step.mean = sde_mean(z, u, t, dt, score_coefficient(step.noise_level, t));
  step.std = step.noise_level * std::sqrt(dt);
  if (step.std > 0.0) {
    step.stochastic = true;
    step.action_noise = rng.normal_vec(z.size());
    step.state_after.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      step.state_after[i] = step.mean[i] + step.std * step.action_noise[i];
    step.log_density = gaussian_log_density(step.state_after, step.mean, step.std);
  } else {
    step.action_noise.assign(z.size(), 0.0);
    step.state_after = step.mean;
  }
  if (!all_finite(step.state_after)) throw NumericalError("sde_sample: non-finite state");
  return step;
}

// Euler integration of dz = u dt from t = 1 to t = 0.
template <VelocityField F>
tcd::LatentTrajectory ode_sample(const F& field, const Vec& z_noise, int steps) {
  tcd::LatentTrajectory traj;
  traj.timesteps = time_grid(steps);
  traj.states.reserve(traj.timesteps.size());
  traj.states.push_back(z_noise);
  for (int j = 0; j < steps; ++j) {
    const double t = traj.timesteps[j];
    const double dt = t - traj.timesteps[j + 1];
    const Vec& z = traj.states.back();
    const Vec u = field(z, t);
    Vec next(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) next[i] = z[i] - dt * u[i];
    if (!all_finite(next)) throw NumericalError("ode_sample: non-finite state");
    traj.states.push_back(std::move(next));
  }
  return traj;
}

// Euler-Maruyama on the reverse-time SDE; each transition is recorded with
// its Gaussian mean, std and log-density. eta = 0 reproduces ode_sample.
template <VelocityField F>
Rollout sde_sample(const F& field, const NoiseSchedule& schedule, const Vec& z_noise, int steps,
                   Rng& rng, std::size_t label = 0) {
  if (!(schedule.eta >= 0.0)) throw Error("sde_sample: eta must be >= 0");
  Rollout r;
  r.label = label;
  r.latent.timesteps = time_grid(steps);
  r.latent.states.push_back(z_noise);
  for (int j = 0; j < steps; ++j) {
    const double t = r.latent.timesteps[j];
    const double dt = t - r.latent.timesteps[j + 1];
    SampledStep step = sde_step(field, schedule, r.latent.states.back(), t, dt, rng);
    step.label = label;
    r.latent.states.push_back(step.state_after);
    r.steps.push_back(std::move(step));
  }
  return r;
}

inline Rollout sde_sample(const VelocityNet& net, const NoiseSchedule& schedule, const Vec& z_noise,
                          int steps, Rng& rng, std::size_t label) {
  return sde_sample(bind(net, label), schedule, z_noise, steps, rng, label);
}

struct LogDensity {
  double value = 0.0;
  Vec grad;  // d value / d params
};

// Log-density of a recorded transition under the network's current
// parameters, with its exact parameter gradient.
inline LogDensity step_log_density(const SampledStep& step, const VelocityNet& net) {
  if (!(step.std > 0.0)) throw Error("step_log_density: step is not stochastic");
  VelocityNet::Cache cache;
  const Vec u = net.forward(step.state_before, step.t, step.label, &cache);
  const double coef = score_coefficient(step.noise_level, step.t);
  const Vec mean = sde_mean(step.state_before, u, step.t, step.dt, coef);
  LogDensity out;
  out.value = gaussian_log_density(step.state_after, mean, step.std);
  if (!std::isfinite(out.value)) throw NumericalError("step_log_density: non-finite value");
  // d logp / d mean = r / std^2 ; d mean / d u = -dt (1 + coef (1 - t)).
  const double dmean_du = -step.dt * (1.0 + coef * (1.0 - step.t));
  Vec grad_u(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    grad_u[i] = dmean_du * (step.state_after[i] - mean[i]) / (step.std * step.std);
  out.grad.assign(net.parameter_count(), 0.0);
  net.backward(cache, grad_u, out.grad);
  return out;
}

inline double step_log_density_value(const SampledStep& step, const VelocityNet& net) {
  if (!(step.std > 0.0)) throw Error("step_log_density: step is not stochastic");
  const Vec u = net.forward(step.state_before, step.t, step.label);
  const Vec mean = sde_mean(step.state_before, u, step.t, step.dt,
                            score_coefficient(step.noise_level, step.t));
  return gaussian_log_density(step.state_after, mean, step.std);
}

// One-step clean prediction x_hat = z - t u(z, t).
template <VelocityField F>
Vec predict_final(const F& field, const Vec& z, double t) {
  const Vec u = field(z, t);
  Vec x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] - t * u[i];
  return x;
}

// ---------------------------------------------------------------------------
// Data and pretraining

struct MixtureMode {
  Vec mean;
  double std = 0.1;
  std::size_t label = 0;
};

struct LabeledPoint {
  Vec x;
  std::size_t label = 0;
};

// Gaussian mixture; a label selects the modes it owns (uniformly).
class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<MixtureMode> modes) : modes_(std::move(modes)) {
    if (modes_.empty()) throw Error("GaussianMixture: no modes");
    const std::size_t d = modes_.front().mean.size();
    for (const auto& m : modes_) {
      if (m.mean.size() != d) throw Error("GaussianMixture: modes differ in dimension");
      if (!(m.std >= 0.0)) throw Error("GaussianMixture: negative std");
      conditions_ = std::max(conditions_, m.label + 1);
    }
  }

  std::size_t dim() const { return modes_.front().mean.size(); }
  std::size_t conditions() const { return conditions_; }
  const std::vector<MixtureMode>& modes() const { return modes_; }

  LabeledPoint sample(std::size_t label, Rng& rng) const {
    std::vector<std::size_t> owned;
    for (std::size_t i = 0; i < modes_.size(); ++i)
      if (modes_[i].label == label) owned.push_back(i);
    if (owned.empty()) throw Error("GaussianMixture: label has no modes");
    const auto& m = modes_[owned[rng.index(owned.size())]];
    LabeledPoint p{m.mean, label};
    for (auto& x : p.x) x += m.std * rng.normal();
    return p;
  }

  std::vector<LabeledPoint> dataset(std::size_t n, Rng& rng) const {
    std::vector<LabeledPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(i % conditions_, rng));
    return out;
  }

 private:
  std::vector<MixtureMode> modes_;
  std::size_t conditions_ = 0;
};

struct PretrainConfig {
  int steps = 3000;
  int batch = 64;
  double lr = 3e-3;
  int validation_batch = 512;
};

struct PretrainResult {
  double final_loss = 0.0;
  double validation_loss = 0.0;
};

// Flow-matching regression of u(z_t, t) onto eps - x along the interpolant.
inline double flow_matching_loss(const VelocityNet& net, std::span<const LabeledPoint> data,
                                 int samples, Rng& rng, Vec* grad = nullptr) {
  if (grad) grad->assign(net.parameter_count(), 0.0);
  double loss = 0.0;
  VelocityNet::Cache cache;
  const std::size_t d = net.dim();
  for (int s = 0; s < samples; ++s) {
    const auto& p = data[rng.index(data.size())];
    const double t = rng.uniform();
    Vec z(d), target(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double e = rng.normal();
      z[i] = (1.0 - t) * p.x[i] + t * e;
      target[i] = e - p.x[i];
    }
    const Vec u = net.forward(z, t, p.label, grad ? &cache : nullptr);
    Vec g(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double r = u[i] - target[i];
      loss += r * r;
      g[i] = 2.0 * r / samples;
    }
    if (grad) net.backward(cache, g, *grad);
  }
  return loss / samples;
}

inline PretrainResult flow_pretrain(std::span<const LabeledPoint> dataset, VelocityNet& net,
                                    const PretrainConfig& config, Rng& rng) {
  if (dataset.empty()) throw Error("flow_pretrain: empty dataset");
  PretrainResult result;
  Adam opt(net.parameter_count(), config.lr);
  Vec grad;
  for (int s = 0; s < config.steps; ++s) {
    // Cosine decay to zero; a constant rate leaves the final iterate noisy
    // enough to unbalance the modes.
    opt.set_learning_rate(config.lr * 0.5 * (1.0 + std::cos(M_PI * s / config.steps)));
    result.final_loss = flow_matching_loss(net, dataset, config.batch, rng, &grad);
    if (!std::isfinite(result.final_loss)) throw NumericalError("flow_pretrain: loss diverged");
    opt.step(net.parameters(), grad);
  }
  Rng val_rng = rng.fork(0x76616c);
  result.validation_loss = flow_matching_loss(net, dataset, config.validation_batch, val_rng);
  if (!std::isfinite(result.validation_loss)) throw NumericalError("flow_pretrain: loss diverged");
  return result;
}

}  // namespace otca::flow

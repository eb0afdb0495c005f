#pragma once

// Training loop: pretrain (or load) the flow policy, then alternate
// rollout -> reward -> credit assignment -> surrogate ascent, logging one
// record per iteration.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otca/checkpoint.hpp"
#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/grpo.hpp"
#include "otca/harness/config.hpp"
#include "otca/optim.hpp"
#include "otca/proxy_eval.hpp"
#include "otca/rewards.hpp"

namespace otca::harness {

// RNG stream identifiers; every consumer forks its own generator from the seed.
enum Stream : std::uint64_t { kData = 1, kInit = 2, kPretrain = 3, kRollout = 4, kProxy = 5 };

struct MetricsRecord {
  int iteration = 0;
  std::string variant;
  std::uint64_t seed = 0;
  Vec mean_rewards;  // per objective
  double aggregate_reward = 0.0;
  double surrogate = 0.0;
  double mean_lambda = 0.0;
  Vec mean_coefficients;
  double weight_entropy = 0.0;
  double wall_time = 0.0;  // seconds; kept out of the metrics log (timing.jsonl)
};

inline nlohmann::json to_json(const MetricsRecord& r, const std::vector<rewards::RewardSpec>& specs) {
  nlohmann::json rewards = nlohmann::json::object();
  for (std::size_t k = 0; k < specs.size(); ++k) rewards[specs[k].name] = r.mean_rewards[k];
  return {{"record", "iteration"},
          {"iteration", r.iteration},
          {"variant", r.variant},
          {"seed", r.seed},
          {"rewards", rewards},
          {"aggregate_reward", r.aggregate_reward},
          {"surrogate", r.surrogate},
          {"mean_lambda", r.mean_lambda},
          {"mean_coefficients", r.mean_coefficients},
          {"weight_entropy", r.weight_entropy}};
}

struct Evaluation {
  Vec mean_rewards;
  double aggregate_reward = 0.0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> log;
  Evaluation final_eval;
  flow::VelocityNet net;
  std::vector<std::string> metrics_lines;  // exactly what was written to metrics.jsonl
};

inline flow::VelocityNet pretrain_model(const ExperimentConfig& cfg, flow::PretrainResult* info = nullptr) {
  const Rng root(cfg.seed);
  Rng data_rng = root.fork(kData);
  Rng init_rng = root.fork(kInit);
  Rng train_rng = root.fork(kPretrain);
  const flow::GaussianMixture mixture(cfg.modes);
  const auto data = mixture.dataset(cfg.dataset_size, data_rng);
  flow::VelocityNet net(cfg.dim, cfg.conditions(), cfg.hidden);
  net.initialize(init_rng);
  const auto res = flow::flow_pretrain(data, net, cfg.pretrain, train_rng);
  if (info) *info = res;
  return net;
}

inline flow::VelocityNet initial_model(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) return pretrain_model(cfg);
  auto ck = flow::load_checkpoint(cfg.checkpoint);
  if (ck.net.dim() != cfg.dim || ck.net.conditions() != cfg.conditions() || ck.net.hidden() != cfg.hidden)
    throw ConfigError("checkpoint shape does not match the config");
  return ck.net;
}

// Mean rewards of SDE samples drawn with a fixed evaluation stream, so every
// variant of a seed is scored on the same noise.
inline Evaluation evaluate_policy(const flow::VelocityNet& net, const ExperimentConfig& cfg) {
  Rng rng = Rng(cfg.eval_seed).fork(cfg.seed);
  Evaluation ev;
  ev.mean_rewards.assign(cfg.rewards.size(), 0.0);
  std::size_t n = 0;
  for (std::size_t label = 0; label < cfg.conditions(); ++label) {
    for (std::size_t s = 0; s < cfg.eval_samples_per_condition; ++s) {
      const Vec z = rng.normal_vec(cfg.dim);
      const auto roll = flow::sde_sample(net, cfg.schedule, z, cfg.steps, rng, label);
      const Vec r = rewards::evaluate_all(cfg.rewards, roll.latent.final_state());
      for (std::size_t k = 0; k < r.size(); ++k) ev.mean_rewards[k] += r[k];
      ++n;
    }
  }
  for (auto& v : ev.mean_rewards) v /= static_cast<double>(n);
  for (double v : ev.mean_rewards) ev.aggregate_reward += v;
  ev.aggregate_reward /= static_cast<double>(ev.mean_rewards.size());
  return ev;
}

// G rollouts for one condition, all from the same initial noise when
// shared_initial_noise is set.
inline grpo::SampleGroup sample_group(const flow::VelocityNet& net, const ExperimentConfig& cfg,
                                      std::size_t label, Rng& rng) {
  grpo::SampleGroup group;
  group.rewards = Matrix(cfg.group_size, cfg.rewards.size());
  const Vec shared = rng.normal_vec(cfg.dim);
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    const Vec z = cfg.shared_initial_noise ? shared : rng.normal_vec(cfg.dim);
    group.rollouts.push_back(flow::sde_sample(net, cfg.schedule, z, cfg.steps, rng, label));
    const Vec r = rewards::evaluate_all(cfg.rewards, group.rollouts.back().latent.final_state());
    for (std::size_t k = 0; k < r.size(); ++k) group.rewards(i, k) = r[k];
  }
  return group;
}

namespace detail {

inline void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace detail

// Runs one training experiment. When `out_dir` is set, writes metrics.jsonl,
// timing.jsonl, summary.json and final.ckpt there. `pretrained` skips
// pretraining (used to share one pretrained model across variants).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::optional<flow::VelocityNet>& pretrained = std::nullopt,
                                       const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  validate(cfg);
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  ExperimentResult result;
  flow::VelocityNet net = pretrained ? *pretrained : initial_model(cfg);
  if (out_dir) std::filesystem::create_directories(*out_dir);

  const std::string variant = variant_name(variant_of(cfg));
  Rng rng = Rng(cfg.seed).fork(kRollout);
  Adam opt(net.parameter_count(), cfg.lr);
  std::vector<std::string> timing;
  const std::size_t k_obj = cfg.rewards.size();

  // Latest parameters whose rollouts were all finite; saved if training diverges.
  flow::VelocityNet last_good = net;
  for (int it = 0; it <= cfg.iterations; ++it) {
    try {
      const bool update = it < cfg.iterations;
      // Rollouts use the current parameters, which are the old policy for this update.
      std::vector<grpo::SampleGroup> groups;
      for (std::size_t g = 0; g < cfg.groups_per_iteration; ++g)
        groups.push_back(sample_group(net, cfg, rng.index(cfg.conditions()), rng));
      last_good = net;

      MetricsRecord rec;
      rec.iteration = it;
      rec.variant = variant;
      rec.seed = cfg.seed;
      rec.mean_rewards.assign(k_obj, 0.0);
      rec.mean_coefficients.assign(k_obj, 0.0);
      Vec grad(net.parameter_count(), 0.0);
      double samples = 0.0;

      for (const auto& group : groups) {
        const auto otca = grpo::otca_step(group, cfg.otca);
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
          for (std::size_t k = 0; k < k_obj; ++k) {
            rec.mean_rewards[k] += group.rewards(i, k);
            rec.mean_coefficients[k] += otca.samples[i].coefficients[k];
          }
          rec.mean_lambda += otca.samples[i].lambda;
          rec.weight_entropy += otca.samples[i].weight_entropy;
          samples += 1.0;
        }
        if (update) {
          const auto sg = grpo::surrogate_gradient(group, otca.effective, net, cfg.clip);
          rec.surrogate += sg.value;
          for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += sg.grad[p];
        } else {
          const Matrix old_logp = grpo::recorded_log_densities(group);
          rec.surrogate += grpo::clipped_surrogate(otca.effective, old_logp, old_logp, cfg.clip);
        }
      }

      const double n_groups = static_cast<double>(groups.size());
      for (auto& v : rec.mean_rewards) v /= samples;
      for (auto& v : rec.mean_coefficients) v /= samples;
      rec.mean_lambda /= samples;
      rec.weight_entropy /= samples;
      rec.surrogate /= n_groups;
      for (double v : rec.mean_rewards) rec.aggregate_reward += v;
      rec.aggregate_reward /= static_cast<double>(k_obj);

      if (update) {
        for (auto& g : grad) g /= n_groups;
        if (!std::isfinite(rec.surrogate) || !all_finite(grad))
          throw NumericalError("training diverged at iteration " + std::to_string(it));
        opt.ascend(net.parameters(), grad);
      }

      rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
      result.metrics_lines.push_back(to_json(rec, cfg.rewards).dump());
      timing.push_back(nlohmann::json{{"iteration", it}, {"wall_time", rec.wall_time}}.dump());
      result.log.push_back(std::move(rec));
    } catch (const NumericalError&) {
      if (out_dir) flow::save_checkpoint(*out_dir / "last_good.ckpt", last_good, cfg.schedule);
      throw;
    }
  }

  result.final_eval = evaluate_policy(net, cfg);
  result.net = net;

  if (out_dir) {
    detail::write_lines(*out_dir / "metrics.jsonl", result.metrics_lines);
    detail::write_lines(*out_dir / "timing.jsonl", timing);
    flow::save_checkpoint(*out_dir / "final.ckpt", net, cfg.schedule);
    nlohmann::json summary{{"variant", variant},
                           {"seed", cfg.seed},
                           {"final_eval",
                            {{"rewards", result.final_eval.mean_rewards},
                             {"aggregate_reward", result.final_eval.aggregate_reward}}},
                           {"config", config_to_json(cfg)}};
    std::ofstream(*out_dir / "summary.json") << summary.dump(2) << '\n';
  }
  return result;
}

// Trajectories for the proxy validation, sampled from `net` with the
// configured SDE and conditions cycled in order.
inline std::vector<flow::Rollout> proxy_rollouts(const flow::VelocityNet& net, const ExperimentConfig& cfg,
                                                 std::size_t count) {
  Rng rng = Rng(cfg.seed).fork(kProxy);
  std::vector<flow::Rollout> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const Vec z = rng.normal_vec(cfg.dim);
    out.push_back(flow::sde_sample(net, cfg.schedule, z, cfg.steps, rng, n % cfg.conditions()));
  }
  return out;
}

}  // namespace otca::harness

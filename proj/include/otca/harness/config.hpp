#pragma once

// Experiment configuration, read from a JSON document. Every section is
// optional and falls back to the defaults below; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/grpo.hpp"
#include "otca/rewards.hpp"

namespace otca::harness {

using nlohmann::json;

enum class Variant { kBaseline, kTcd, kMoca, kFull };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kTcd: return "tcd";
    case Variant::kMoca: return "moca";
    case Variant::kFull: return "full";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "tcd") return Variant::kTcd;
  if (s == "moca") return Variant::kMoca;
  if (s == "full") return Variant::kFull;
  throw ConfigError("unknown variant '" + s + "' (expected baseline, tcd, moca or full)");
}

inline std::vector<Variant> all_variants() {
  return {Variant::kBaseline, Variant::kTcd, Variant::kMoca, Variant::kFull};
}

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t dim = 2;

  std::vector<flow::MixtureMode> modes = {
      {{2.0, 0.0}, 0.3, 0}, {{-2.0, 0.0}, 0.3, 0}, {{0.0, 2.0}, 0.3, 1}, {{0.0, -2.0}, 0.3, 1}};
  std::size_t dataset_size = 4096;

  std::vector<std::size_t> hidden = {32, 32};
  flow::NoiseSchedule schedule;  // eta 0.3
  int steps = 16;

  flow::PretrainConfig pretrain;
  std::string checkpoint;  // load instead of pretraining when non-empty

  std::size_t group_size = 12;
  std::size_t groups_per_iteration = 4;
  int iterations = 200;
  double lr = 1e-3;
  grpo::ClipConfig clip;
  bool shared_initial_noise = true;

  grpo::OtcaConfig otca;

  std::vector<rewards::RewardSpec> rewards = rewards::default_suite();

  std::size_t eval_samples_per_condition = 256;
  std::uint64_t eval_seed = 20240601;

  std::size_t ablation_seeds = 5;
  std::size_t proxy_trajectories = 128;

  std::string output_dir = "runs/default";

  std::size_t conditions() const {
    std::size_t c = 0;
    for (const auto& m : modes) c = std::max(c, m.label + 1);
    return c;
  }
};

// Mode flags for a variant; exploration stays on (ignored when c is uniform).
inline void apply_variant(ExperimentConfig& cfg, Variant v) {
  cfg.otca.uniform_w = (v == Variant::kBaseline || v == Variant::kMoca);
  cfg.otca.uniform_c = (v == Variant::kBaseline || v == Variant::kTcd);
}

inline Variant variant_of(const ExperimentConfig& cfg) {
  if (cfg.otca.uniform_w && cfg.otca.uniform_c) return Variant::kBaseline;
  if (cfg.otca.uniform_c) return Variant::kTcd;
  if (cfg.otca.uniform_w) return Variant::kMoca;
  return Variant::kFull;
}

namespace detail {

// Reads keys from one JSON object, remembering which were used so leftovers
// can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string child(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline rewards::RewardSpec parse_reward(const json& j, const std::string& path) {
  Section s(j, path);
  rewards::RewardSpec spec;
  std::string kind;
  s.get("name", spec.name);
  s.get("kind", kind);
  if (kind == "mode_proximity") {
    rewards::ModeProximity m;
    s.get("target", m.target);
    s.get("scale", m.scale);
    spec.kind = m;
  } else if (kind == "direction_alignment") {
    rewards::DirectionAlignment a;
    s.get("axis", a.axis);
    spec.kind = a;
  } else if (kind == "norm_penalty") {
    rewards::NormPenalty n;
    s.get("radius", n.radius);
    spec.kind = n;
  } else {
    throw ConfigError(path + ": unknown reward kind '" + kind + "'");
  }
  s.finish();
  rewards::validate(spec);
  return spec;
}

inline json reward_to_json(const rewards::RewardSpec& spec) {
  json j{{"name", spec.name}};
  if (const auto* m = std::get_if<rewards::ModeProximity>(&spec.kind)) {
    j["kind"] = "mode_proximity";
    j["target"] = m->target;
    j["scale"] = m->scale;
  } else if (const auto* a = std::get_if<rewards::DirectionAlignment>(&spec.kind)) {
    j["kind"] = "direction_alignment";
    j["axis"] = a->axis;
  } else if (const auto* n = std::get_if<rewards::NormPenalty>(&spec.kind)) {
    j["kind"] = "norm_penalty";
    j["radius"] = n->radius;
  }
  return j;
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  if (c.dim == 0) throw ConfigError("dim must be positive");
  if (c.steps < 2) throw ConfigError("schedule.steps must be >= 2");
  if (c.group_size < 2) throw ConfigError("grpo.group_size must be >= 2");
  if (c.groups_per_iteration < 1) throw ConfigError("grpo.groups_per_iteration must be >= 1");
  if (c.iterations < 0) throw ConfigError("grpo.iterations must be >= 0");
  if (!(c.lr > 0.0)) throw ConfigError("grpo.lr must be positive");
  if (!(c.clip.eps > 0.0)) throw ConfigError("grpo.clip_eps must be positive");
  if (!(c.schedule.eta >= 0.0)) throw ConfigError("schedule.eta must be >= 0");
  if (!(c.schedule.cap > 0.0) || !(c.schedule.delta > 0.0))
    throw ConfigError("schedule.noise_cap and schedule.delta must be positive");
  if (!(c.otca.tcd_eps > 0.0) || !(c.otca.moca_tolerance > 0.0) || !(c.otca.exploration_eps > 0.0))
    throw ConfigError("otca tolerances must be positive");
  if (!(c.otca.w_min >= 0.0) || c.otca.w_min > 1.0) throw ConfigError("otca.w_min must lie in [0, 1]");
  if (c.modes.empty()) throw ConfigError("data.modes must not be empty");
  for (const auto& m : c.modes)
    if (m.mean.size() != c.dim) throw ConfigError("data.modes: mean dimension differs from dim");
  if (c.rewards.empty()) throw ConfigError("rewards must not be empty");
  for (const auto& r : c.rewards) rewards::validate(r);
  if (c.pretrain.steps < 0 || c.pretrain.batch < 1) throw ConfigError("pretrain settings invalid");
  if (c.eval_samples_per_condition < 1) throw ConfigError("eval.samples_per_condition must be >= 1");
  if (c.proxy_trajectories < 2) throw ConfigError("proxy.trajectories must be >= 2");
  if (c.ablation_seeds < 1) throw ConfigError("ablation.seeds must be >= 1");
}

inline ExperimentConfig config_from_json(const json& root) {
  ExperimentConfig c;
  detail::Section top(root, "config");
  top.get("seed", c.seed);
  top.get("dim", c.dim);

  if (top.has("data")) {
    detail::Section s(top.sub("data"), "config.data");
    if (s.has("modes")) {
      const json& modes = s.sub("modes");
      if (!modes.is_array()) throw ConfigError("config.data.modes: expected an array");
      c.modes.clear();
      for (std::size_t i = 0; i < modes.size(); ++i) {
        detail::Section m(modes[i], "config.data.modes[" + std::to_string(i) + "]");
        flow::MixtureMode mode;
        m.get("mean", mode.mean);
        m.get("std", mode.std);
        m.get("label", mode.label);
        m.finish();
        c.modes.push_back(mode);
      }
    }
    s.get("dataset_size", c.dataset_size);
    s.finish();
  }

  if (top.has("network")) {
    detail::Section s(top.sub("network"), "config.network");
    s.get("hidden", c.hidden);
    s.finish();
  }

  if (top.has("schedule")) {
    detail::Section s(top.sub("schedule"), "config.schedule");
    std::string form = c.schedule.form == flow::NoiseForm::kScaled ? "scaled" : "constant";
    s.get("eta", c.schedule.eta);
    s.get("steps", c.steps);
    s.get("noise_form", form);
    s.get("noise_cap", c.schedule.cap);
    s.get("delta", c.schedule.delta);
    s.finish();
    if (form == "scaled") {
      c.schedule.form = flow::NoiseForm::kScaled;
    } else if (form == "constant") {
      c.schedule.form = flow::NoiseForm::kConstant;
    } else {
      throw ConfigError("config.schedule.noise_form: expected 'scaled' or 'constant'");
    }
  }

  if (top.has("pretrain")) {
    detail::Section s(top.sub("pretrain"), "config.pretrain");
    s.get("steps", c.pretrain.steps);
    s.get("batch", c.pretrain.batch);
    s.get("lr", c.pretrain.lr);
    s.get("checkpoint", c.checkpoint);
    s.finish();
  }

  if (top.has("grpo")) {
    detail::Section s(top.sub("grpo"), "config.grpo");
    std::string clip_mode = c.clip.mode == grpo::ClipMode::kHalfWidth ? "half_width" : "ratio_floor";
    s.get("group_size", c.group_size);
    s.get("groups_per_iteration", c.groups_per_iteration);
    s.get("iterations", c.iterations);
    s.get("lr", c.lr);
    s.get("clip_eps", c.clip.eps);
    s.get("clip_mode", clip_mode);
    s.get("shared_initial_noise", c.shared_initial_noise);
    s.finish();
    if (clip_mode == "half_width") {
      c.clip.mode = grpo::ClipMode::kHalfWidth;
    } else if (clip_mode == "ratio_floor") {
      c.clip.mode = grpo::ClipMode::kRatioFloor;
    } else {
      throw ConfigError("config.grpo.clip_mode: expected 'half_width' or 'ratio_floor'");
    }
  }

  if (top.has("otca")) {
    detail::Section s(top.sub("otca"), "config.otca");
    s.get("tcd_eps", c.otca.tcd_eps);
    s.get("moca_tolerance", c.otca.moca_tolerance);
    s.get("exploration_eps", c.otca.exploration_eps);
    s.get("w_min", c.otca.w_min);
    s.get("uniform_w", c.otca.uniform_w);
    s.get("uniform_c", c.otca.uniform_c);
    s.get("exploration", c.otca.exploration);
    if (s.has("variant")) {
      std::string v;
      s.get("variant", v);
      apply_variant(c, parse_variant(v));
    }
    s.finish();
  }

  if (top.has("rewards")) {
    const json& rs = top.sub("rewards");
    if (!rs.is_array()) throw ConfigError("config.rewards: expected an array");
    c.rewards.clear();
    for (std::size_t i = 0; i < rs.size(); ++i)
      c.rewards.push_back(detail::parse_reward(rs[i], "config.rewards[" + std::to_string(i) + "]"));
  }

  if (top.has("eval")) {
    detail::Section s(top.sub("eval"), "config.eval");
    s.get("samples_per_condition", c.eval_samples_per_condition);
    s.get("seed", c.eval_seed);
    s.finish();
  }

  if (top.has("ablation")) {
    detail::Section s(top.sub("ablation"), "config.ablation");
    s.get("seeds", c.ablation_seeds);
    s.finish();
  }

  if (top.has("proxy")) {
    detail::Section s(top.sub("proxy"), "config.proxy");
    s.get("trajectories", c.proxy_trajectories);
    s.finish();
  }

  if (top.has("output")) {
    detail::Section s(top.sub("output"), "config.output");
    s.get("dir", c.output_dir);
    s.finish();
  }

  top.finish();
  validate(c);
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (const auto& m : c.modes) modes.push_back({{"mean", m.mean}, {"std", m.std}, {"label", m.label}});
  json rewards = json::array();
  for (const auto& r : c.rewards) rewards.push_back(detail::reward_to_json(r));
  return {
      {"seed", c.seed},
      {"dim", c.dim},
      {"data", {{"modes", modes}, {"dataset_size", c.dataset_size}}},
      {"network", {{"hidden", c.hidden}}},
      {"schedule",
       {{"eta", c.schedule.eta},
        {"steps", c.steps},
        {"noise_form", c.schedule.form == flow::NoiseForm::kScaled ? "scaled" : "constant"},
        {"noise_cap", c.schedule.cap},
        {"delta", c.schedule.delta}}},
      {"pretrain",
       {{"steps", c.pretrain.steps},
        {"batch", c.pretrain.batch},
        {"lr", c.pretrain.lr},
        {"checkpoint", c.checkpoint}}},
      {"grpo",
       {{"group_size", c.group_size},
        {"groups_per_iteration", c.groups_per_iteration},
        {"iterations", c.iterations},
        {"lr", c.lr},
        {"clip_eps", c.clip.eps},
        {"clip_mode", c.clip.mode == grpo::ClipMode::kHalfWidth ? "half_width" : "ratio_floor"},
        {"shared_initial_noise", c.shared_initial_noise}}},
      {"otca",
       {{"tcd_eps", c.otca.tcd_eps},
        {"moca_tolerance", c.otca.moca_tolerance},
        {"exploration_eps", c.otca.exploration_eps},
        {"w_min", c.otca.w_min},
        {"uniform_w", c.otca.uniform_w},
        {"uniform_c", c.otca.uniform_c},
        {"exploration", c.otca.exploration}}},
      {"rewards", rewards},
      {"eval", {{"samples_per_condition", c.eval_samples_per_condition}, {"seed", c.eval_seed}}},
      {"ablation", {{"seeds", c.ablation_seeds}}},
      {"proxy", {{"trajectories", c.proxy_trajectories}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace otca::harness

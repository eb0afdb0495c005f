#pragma once

// Variant comparison across seeds and reward-curve export.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otca/error.hpp"
#include "otca/harness/config.hpp"
#include "otca/harness/experiment.hpp"

namespace otca::harness {

struct AblationRow {
  std::string variant;
  std::size_t n_seeds = 0;
  Vec reward_mean;  // per objective, over seeds
  Vec reward_std;
  double aggregate_mean = 0.0;
  double aggregate_std = 0.0;
  Vec aggregate_per_seed;
};

struct AblationTable {
  std::vector<std::string> objectives;
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& variant) const {
    for (const auto& r : rows)
      if (r.variant == variant) return r;
    throw Error("ablation table has no variant '" + variant + "'");
  }

  // sqrt of the mean per-variant variance of the aggregate reward.
  double pooled_aggregate_std() const {
    double v = 0.0;
    for (const auto& r : rows) v += r.aggregate_std * r.aggregate_std;
    return rows.empty() ? 0.0 : std::sqrt(v / static_cast<double>(rows.size()));
  }
};

// Config with the fields a comparison may vary blanked out.
inline nlohmann::json comparison_key(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("seed");
  j["otca"].erase("uniform_w");
  j["otca"].erase("uniform_c");
  j["otca"].erase("exploration");
  j.erase("output");
  return j;
}

struct RunOutcome {
  std::string variant;
  std::uint64_t seed = 0;
  Evaluation final_eval;
  std::vector<std::string> metrics_lines;
};

// Runs every config and tabulates final evaluation rewards per variant
// (mean and population std over seeds). Rows keep first-appearance order; a
// variant listed twice under the same seed contributes twice. Pretrained
// models are shared between configs with the same seed.
inline AblationTable compare_variants(const std::vector<ExperimentConfig>& configs,
                                      std::vector<RunOutcome>* outcomes = nullptr,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  if (configs.empty()) throw Error("compare_variants: no configs");
  const auto key = comparison_key(configs.front());
  for (const auto& c : configs)
    if (comparison_key(c) != key)
      throw ConfigError("compare_variants: configs differ in more than mode flags and seed");

  std::map<std::uint64_t, flow::VelocityNet> pretrained;
  std::vector<std::string> order;
  std::map<std::string, std::vector<Evaluation>> evals;
  for (std::size_t n = 0; n < configs.size(); ++n) {
    const auto& cfg = configs[n];
    auto it = pretrained.find(cfg.seed);
    if (it == pretrained.end()) it = pretrained.emplace(cfg.seed, initial_model(cfg)).first;
    const std::string variant = variant_name(variant_of(cfg));
    std::optional<std::filesystem::path> run_dir;
    if (out_dir) run_dir = *out_dir / (variant + "_seed" + std::to_string(cfg.seed) + "_" + std::to_string(n));
    auto res = run_experiment(cfg, it->second, run_dir);
    if (!evals.count(variant)) order.push_back(variant);
    evals[variant].push_back(res.final_eval);
    if (outcomes) outcomes->push_back({variant, cfg.seed, res.final_eval, std::move(res.metrics_lines)});
  }

  AblationTable table;
  for (const auto& r : configs.front().rewards) table.objectives.push_back(r.name);
  const std::size_t k = table.objectives.size();
  for (const auto& name : order) {
    const auto& list = evals[name];
    AblationRow row;
    row.variant = name;
    row.n_seeds = list.size();
    row.reward_mean.assign(k, 0.0);
    row.reward_std.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      Vec xs;
      for (const auto& e : list) xs.push_back(e.mean_rewards[j]);
      const auto s = proxy::summarize(xs);
      row.reward_mean[j] = s.mean;
      row.reward_std[j] = s.std;
    }
    for (const auto& e : list) row.aggregate_per_seed.push_back(e.aggregate_reward);
    const auto s = proxy::summarize(row.aggregate_per_seed);
    row.aggregate_mean = s.mean;
    row.aggregate_std = s.std;
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Baseline, TCD-only, MOCA-only and full OTCA for `seeds` consecutive seeds
// starting at the base config's seed.
inline std::vector<ExperimentConfig> ablation_configs(const ExperimentConfig& base, std::size_t seeds) {
  std::vector<ExperimentConfig> out;
  for (Variant v : all_variants()) {
    for (std::size_t s = 0; s < seeds; ++s) {
      ExperimentConfig c = base;
      c.seed = base.seed + s;
      apply_variant(c, v);
      out.push_back(c);
    }
  }
  return out;
}

inline std::string format_table(const AblationTable& t) {
  std::ostringstream os;
  os << "| variant | seeds |";
  for (const auto& o : t.objectives) os << ' ' << o << " |";
  os << " aggregate |\n|---|---|";
  for (std::size_t i = 0; i < t.objectives.size(); ++i) os << "---|";
  os << "---|\n";
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& r : t.rows) {
    os << "| " << r.variant << " | " << r.n_seeds << " |";
    for (std::size_t k = 0; k < r.reward_mean.size(); ++k)
      os << ' ' << r.reward_mean[k] << " ± " << r.reward_std[k] << " |";
    os << ' ' << r.aggregate_mean << " ± " << r.aggregate_std << " |\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const AblationTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"variant", r.variant},
                    {"n_seeds", r.n_seeds},
                    {"reward_mean", r.reward_mean},
                    {"reward_std", r.reward_std},
                    {"aggregate_mean", r.aggregate_mean},
                    {"aggregate_std", r.aggregate_std},
                    {"aggregate_per_seed", r.aggregate_per_seed}});
  return {{"objectives", t.objectives}, {"rows", rows}, {"pooled_aggregate_std", t.pooled_aggregate_std()}};
}

// ---------------------------------------------------------------------------
// Reward curves

struct CurvePoint {
  int iteration = 0;
  std::string variant;
  std::string objective;
  double value = 0.0;
};

// Per-variant, per-objective mean reward over iterations (averaged over
// seeds), plus an "aggregate" series. Input is metrics-log records; records
// of other kinds are ignored. Each (variant, seed) series must cover
// iterations 0..n without gaps.
inline std::vector<CurvePoint> emit_reward_curves(const std::vector<nlohmann::json>& log) {
  struct Acc {
    double sum = 0.0;
    int count = 0;
  };
  // variant -> iteration -> objective -> accumulator
  std::map<std::string, std::map<int, std::map<std::string, Acc>>> acc;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<int>> series;
  std::vector<std::string> variant_order;
  std::vector<std::string> objective_order;
  for (const auto& rec : log) {
    if (rec.value("record", "") != "iteration") continue;
    const std::string variant = rec.at("variant").get<std::string>();
    const int it = rec.at("iteration").get<int>();
    series[{variant, rec.at("seed").get<std::uint64_t>()}].push_back(it);
    if (!acc.count(variant)) variant_order.push_back(variant);
    auto& slot = acc[variant][it];
    for (const auto& [name, value] : rec.at("rewards").items()) {
      if (std::find(objective_order.begin(), objective_order.end(), name) == objective_order.end())
        objective_order.push_back(name);
      slot[name].sum += value.get<double>();
      slot[name].count += 1;
    }
    slot["aggregate"].sum += rec.at("aggregate_reward").get<double>();
    slot["aggregate"].count += 1;
  }
  if (series.empty()) throw Error("reward curves: metrics log has no iteration records");
  for (const auto& [key, its] : series) {
    for (std::size_t n = 0; n < its.size(); ++n)
      if (its[n] != static_cast<int>(n))
        throw Error("reward curves: missing iteration " + std::to_string(n) + " for variant '" + key.first +
                    "' seed " + std::to_string(key.second));
  }
  objective_order.push_back("aggregate");
  std::vector<CurvePoint> out;
  for (const auto& variant : variant_order)
    for (const auto& [it, objectives] : acc[variant])
      for (const auto& name : objective_order) {
        const auto f = objectives.find(name);
        if (f == objectives.end()) continue;
        out.push_back({it, variant, name, f->second.sum / f->second.count});
      }
  return out;
}

inline std::string curves_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,variant,objective,value\n";
  for (const auto& p : points) os << p.iteration << ',' << p.variant << ',' << p.objective << ',' << p.value << '\n';
  return os.str();
}

inline std::vector<nlohmann::json> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metrics log " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace otca::harness

// Command-line experiment runner.
//
//   otca pretrain   --config cfg.json [--seed N] [--out DIR]
//   otca train      --config cfg.json [--seed N] [--out DIR] [--variant V]
//   otca ablate     --config cfg.json [--seed N] [--out DIR]
//   otca proxy-eval --config cfg.json [--seed N] [--out DIR] [--checkpoint PATH]
//   otca curves     --log metrics.jsonl [--out DIR]
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "otca/otca.hpp"

namespace fs = std::filesystem;
using namespace otca;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::string checkpoint;
  std::string log;
};

harness::ExperimentConfig load(const Options& o) {
  harness::ExperimentConfig cfg = o.config.empty() ? harness::ExperimentConfig{} : harness::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.variant.empty()) harness::apply_variant(cfg, harness::parse_variant(o.variant));
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  harness::validate(cfg);
  return cfg;
}

void append_line(const fs::path& path, const std::string& line) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot append to " + path.string());
  out << line << '\n';
}

int cmd_pretrain(const Options& o) {
  auto cfg = load(o);
  flow::PretrainResult info;
  const auto net = harness::pretrain_model(cfg, &info);
  const fs::path path = fs::path(cfg.output_dir) / "pretrained.ckpt";
  flow::save_checkpoint(path, net, cfg.schedule);
  std::cout << "pretrained " << net.parameter_count() << " parameters; final loss " << info.final_loss
            << ", validation loss " << info.validation_loss << "\ncheckpoint: " << path.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  auto cfg = load(o);
  const auto res = harness::run_experiment(cfg, std::nullopt, fs::path(cfg.output_dir));
  const auto& last = res.log.back();
  std::cout << "variant " << last.variant << ", seed " << cfg.seed << ", " << cfg.iterations << " iterations\n"
            << "final rollout aggregate reward " << last.aggregate_reward << "\nfinal evaluation aggregate reward "
            << res.final_eval.aggregate_reward << "\noutputs in " << cfg.output_dir << '\n';
  return 0;
}

int cmd_ablate(const Options& o) {
  auto cfg = load(o);
  const fs::path out = cfg.output_dir;
  std::vector<harness::RunOutcome> outcomes;
  const auto table = harness::compare_variants(harness::ablation_configs(cfg, cfg.ablation_seeds), &outcomes, out);
  std::ofstream(out / "metrics.jsonl");  // truncate
  for (const auto& run : outcomes)
    for (const auto& line : run.metrics_lines) append_line(out / "metrics.jsonl", line);
  std::ofstream(out / "ablation.md") << harness::format_table(table);
  std::ofstream(out / "ablation.json") << harness::to_json(table).dump(2) << '\n';
  std::cout << harness::format_table(table) << "pooled std of aggregate: " << table.pooled_aggregate_std()
            << "\noutputs in " << out.string() << '\n';
  return 0;
}

int cmd_proxy(const Options& o) {
  auto cfg = load(o);
  const auto net = harness::initial_model(cfg);
  const auto rollouts = harness::proxy_rollouts(net, cfg, cfg.proxy_trajectories);
  const auto report = proxy::proxy_report(rollouts, net, cfg.rewards);
  const auto record = proxy::to_json(report);
  append_line(fs::path(cfg.output_dir) / "metrics.jsonl", record.dump());
  std::cout << record.dump(2) << '\n';
  return 0;
}

int cmd_curves(const Options& o) {
  if (o.log.empty()) throw ConfigError("curves: --log is required");
  const auto points = harness::emit_reward_curves(harness::read_metrics_log(o.log));
  const fs::path out = o.out.empty() ? fs::path(o.log).parent_path() : fs::path(o.out);
  if (!out.empty()) fs::create_directories(out);
  const fs::path path = out / "curves.csv";
  std::ofstream(path) << harness::curves_csv(points);
  std::cout << "wrote " << points.size() << " points to " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Credit-assigned GRPO on a toy flow-matching policy"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the flow model and write a checkpoint");
  add_common(pretrain);
  auto* train = app.add_subcommand("train", "Run one GRPO training experiment");
  add_common(train);
  train->add_option("--variant", o.variant, "baseline | tcd | moca | full")
      ->check(CLI::IsMember({"baseline", "tcd", "moca", "full"}));
  auto* ablate = app.add_subcommand("ablate", "Run all four variants over several seeds");
  add_common(ablate);
  auto* proxy = app.add_subcommand("proxy-eval", "Correlate alignment gains with reward gains");
  add_common(proxy);
  proxy->add_option("--checkpoint", o.checkpoint, "Model checkpoint to evaluate");
  auto* curves = app.add_subcommand("curves", "Export reward curves from a metrics log");
  curves->add_option("--log", o.log, "Metrics log (JSON lines)")->required();
  curves->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pretrain) return cmd_pretrain(o);
    if (*train) return cmd_train(o);
    if (*ablate) return cmd_ablate(o);
    if (*proxy) return cmd_proxy(o);
    if (*curves) return cmd_curves(o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// Command-line front end: train / pilot-overlap / pilot-drift / eval /
// merge / plot-data. Exit codes: 0 success, 2 invalid config or arguments,
// 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "copd/checkpoint.hpp"
#include "copd/config.hpp"
#include "copd/domains.hpp"
#include "copd/errors.hpp"
#include "copd/metrics_log.hpp"
#include "copd/orchestrator.hpp"
#include "copd/pilots.hpp"
#include "copd/plot_data.hpp"

namespace {

namespace fs = std::filesystem;
using copd::RunConfig;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration")->required();
  cmd->add_option("--seed", [&opts](const CLI::results_t& res) {
        opts.seed = std::stoull(res[0]);
        return true;
      },
      "Override the config seed");
  cmd->add_option("--out", [&opts](const CLI::results_t& res) {
        opts.out = res[0];
        return true;
      },
      "Override the config output directory");
  cmd->add_flag("--dry-run", opts.dry_run, "Validate and print resolved settings, then stop");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = copd::load_run_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.out_dir = *opts.out;
  copd::validate(cfg);
  return cfg;
}

std::string run_id(const RunConfig& cfg) {
  return fs::path(cfg.out_dir).filename().string() + "-s" + std::to_string(cfg.seed);
}

nlohmann::json header_for(const RunConfig& cfg, const std::string& command) {
  nlohmann::json domains = nlohmann::json::array();
  nlohmann::json betas = nlohmann::json::array();
  for (const auto& b : cfg.branches) {
    domains.push_back(b.domain);
    betas.push_back(b.beta);
  }
  return {{"run", run_id(cfg)},      {"command", command},
          {"mode", to_string(cfg.schedule.mode)},
          {"branches", domains},     {"betas", betas},
          {"cycles", cfg.schedule.cycles},
          {"s_rl", cfg.schedule.rlvr_steps},
          {"s_opd", cfg.schedule.opd_steps},
          {"k", cfg.metrics.k},      {"seed", cfg.seed},
          {"window", cfg.window}};
}

int print_dry_run(const RunConfig& cfg) {
  std::cout << copd::to_json(cfg).dump(2) << '\n';
  return 0;
}

int cmd_train(const CommonOpts& opts, int workers) {
  const RunConfig cfg = resolve_config(opts);
  if (opts.dry_run) return print_dry_run(cfg);
  copd::MetricsWriter writer(fs::path(cfg.out_dir) / "metrics.jsonl",
                             header_for(cfg, "train"));
  const copd::TrainResult result = copd::run_training(cfg, writer, workers);
  std::cout << "run " << run_id(cfg) << ": " << result.total_updates
            << " updates, metrics at " << writer.path().string() << '\n';
  std::cout << "final eval (exact match, greedy):\n";
  for (const copd::EvalRow& row : result.final_evals) {
    std::printf("  %-10s %-10s %.4f\n", row.model.c_str(), row.domain.c_str(), row.accuracy);
  }
  std::cout << "merged checkpoint: " << (fs::path(cfg.out_dir) / "merged.ckpt").string()
            << '\n';
  return 0;
}

int cmd_pilot_overlap(const CommonOpts& opts, const std::string& teacher_path) {
  const RunConfig cfg = resolve_config(opts);
  if (opts.dry_run) return print_dry_run(cfg);
  std::optional<copd::Policy> teacher;
  if (!teacher_path.empty())
    teacher = copd::load_checkpoint(teacher_path, copd::task_vocab());
  copd::MetricsWriter writer(fs::path(cfg.out_dir) / "metrics.jsonl",
                             header_for(cfg, "pilot-overlap"));
  const copd::OverlapGainResult res = copd::pilot_overlap_gain(cfg, writer, teacher);
  std::printf("%-8s %-6s %-8s %-8s %-8s %-8s %-8s\n", "variant", "temp", "overlap", "pre",
              "post", "gain", "se");
  for (const copd::OverlapGainRow& r : res.rows) {
    std::printf("%-8d %-6.2f %-8.4f %-8.4f %-8.4f %+-8.4f %-8.4f%s\n", r.variant,
                r.temperature, r.overlap, r.pre, r.post, r.gain, r.se,
                r.control ? "  (control)" : "");
  }
  std::printf("spearman(overlap, gain) = %.4f\n", res.spearman);
  if (res.reduced_confidence)
    std::cerr << "warning: fewer than 3 distinct overlap levels; the rank correlation "
                 "carries little information\n";
  return 0;
}

int cmd_pilot_drift(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  if (opts.dry_run) return print_dry_run(cfg);
  copd::MetricsWriter writer(fs::path(cfg.out_dir) / "metrics.jsonl",
                             header_for(cfg, "pilot-drift"));
  const auto points = copd::pilot_drift(cfg, writer);
  std::printf("%-8s %-8s %-10s %-12s\n", "branch", "step", "overlap", "sym_kl");
  for (const copd::DriftPoint& p : points)
    std::printf("%-8d %-8ld %-10.4f %-12.6g\n", p.branch, p.step, p.overlap, p.sym_kl);
  std::cout << "metrics at " << writer.path().string() << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& domains_csv, int n,
             std::uint64_t seed, int max_len, const std::string& out_path) {
  const copd::Policy policy = copd::load_checkpoint(ckpt, copd::task_vocab());
  std::vector<std::string> domains;
  for (size_t start = 0; start <= domains_csv.size();) {
    const size_t comma = domains_csv.find(',', start);
    const std::string part = domains_csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) domains.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (domains.empty()) throw copd::ConfigError("--domains must name at least one domain");
  std::string table = "domain\taccuracy\n";
  for (const std::string& d : domains) {
    const copd::Domain dom = copd::make_domain(d);
    const double acc = copd::eval_accuracy(policy, dom, n, seed, max_len);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s\t%.6f\n", d.c_str(), acc);
    table += buf;
  }
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw copd::ConfigError("cannot open output file: " + out_path);
    out << table;
  }
  return 0;
}

int cmd_merge(const std::vector<std::string>& ckpts, const std::string& weights_csv,
              const std::string& out_path) {
  std::vector<copd::Policy> policies;
  for (const std::string& p : ckpts)
    policies.push_back(copd::load_checkpoint(p, copd::task_vocab()));
  copd::MergeSpec spec;
  if (weights_csv.empty()) {
    spec.weights.assign(policies.size(), 1.0 / static_cast<double>(policies.size()));
  } else {
    for (size_t start = 0; start <= weights_csv.size();) {
      const size_t comma = weights_csv.find(',', start);
      const std::string part = weights_csv.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!part.empty()) spec.weights.push_back(std::stod(part));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  const copd::Policy merged = copd::merge(policies, spec);
  copd::save_checkpoint(merged, out_path);
  std::cout << "merged " << policies.size() << " checkpoints into " << out_path << '\n';
  return 0;
}

int cmd_plot_data(const std::vector<std::string>& metrics, const std::string& figure,
                  const std::string& out_dir, bool dry_run) {
  std::vector<fs::path> paths(metrics.begin(), metrics.end());
  for (const fs::path& p : paths) {
    if (!fs::exists(p)) throw copd::ConfigError("metrics file does not exist: " + p.string());
  }
  const auto& ids = copd::plot_figure_ids();
  if (std::find(ids.begin(), ids.end(), figure) == ids.end()) {
    std::string known;
    for (const std::string& id : ids) known += (known.empty() ? "" : ", ") + id;
    throw copd::ConfigError("unknown figure id '" + figure + "' (known: " + known + ")");
  }
  if (dry_run) {
    std::cout << "would write " << (fs::path(out_dir) / (figure + ".tsv")).string() << '\n';
    return 0;
  }
  const fs::path written = copd::write_plot_data(paths, figure, out_dir);
  std::cout << "wrote " << written.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-evolving policy distillation on synthetic verifiable token tasks"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  int workers = 1;
  CLI::App* train = app.add_subcommand("train", "Run a training schedule");
  add_common(train, train_opts);
  train->add_option("--workers", workers, "Branch update worker threads")
      ->check(CLI::PositiveNumber);

  CommonOpts po_opts;
  std::string teacher_path;
  CLI::App* po = app.add_subcommand("pilot-overlap",
                                    "Overlap-predicts-gain pilot study");
  add_common(po, po_opts);
  po->add_option("--teacher", teacher_path, "Teacher checkpoint (trained here if omitted)");

  CommonOpts pd_opts;
  CLI::App* pd = app.add_subcommand("pilot-drift", "Behavioral drift pilot study");
  add_common(pd, pd_opts);

  std::string eval_ckpt, eval_domains, eval_out;
  int eval_n = 0, eval_max_len = 4;
  std::uint64_t eval_seed = 1;
  CLI::App* ev = app.add_subcommand("eval", "Greedy exact-match accuracy of a checkpoint");
  ev->add_option("--ckpt", eval_ckpt, "Policy checkpoint")->required();
  ev->add_option("--domains", eval_domains, "Comma-separated domain ids")->required();
  ev->add_option("--n", eval_n, "Eval prompts per domain (0 = full split)");
  ev->add_option("--seed", eval_seed, "Subsample seed");
  ev->add_option("--max-len", eval_max_len, "Completion length cap");
  ev->add_option("--out", eval_out, "Also write the table to this file");

  std::vector<std::string> merge_ckpts;
  std::string merge_weights, merge_out;
  CLI::App* mg = app.add_subcommand("merge", "Weighted parameter average of checkpoints");
  mg->add_option("ckpts", merge_ckpts, "Input checkpoints")->required()->expected(-1);
  mg->add_option("--weights", merge_weights, "Comma-separated weights (default uniform)");
  mg->add_option("--out", merge_out, "Output checkpoint path")->required();

  std::vector<std::string> plot_metrics;
  std::string plot_figure, plot_out;
  bool plot_dry = false;
  CLI::App* pl = app.add_subcommand("plot-data", "Export figure-ready TSV from metrics");
  pl->add_option("--metrics", plot_metrics, "Metrics JSONL files")->required()->expected(-1);
  pl->add_option("--figure", plot_figure, "Figure id")->required();
  pl->add_option("--out", plot_out, "Output directory")->required();
  pl->add_flag("--dry-run", plot_dry, "Validate inputs without writing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(train_opts, workers);
    if (*po) return cmd_pilot_overlap(po_opts, teacher_path);
    if (*pd) return cmd_pilot_drift(pd_opts);
    if (*ev) return cmd_eval(eval_ckpt, eval_domains, eval_n, eval_seed, eval_max_len, eval_out);
    if (*mg) return cmd_merge(merge_ckpts, merge_weights, merge_out);
    if (*pl) return cmd_plot_data(plot_metrics, plot_figure, plot_out, plot_dry);
  } catch (const copd::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

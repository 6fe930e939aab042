#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copd/branch.hpp"
#include "copd/config.hpp"
#include "copd/domains.hpp"
#include "copd/metrics_log.hpp"

namespace copd {

struct MergeSpec {
  std::vector<double> weights;  // nonnegative, sum 1, one per policy
};

// Elementwise weighted parameter average. Linear in each branch: the merged
// logits are the weighted sum of branch logits at every context.
Policy merge(std::span<const Policy> policies, const MergeSpec& spec);

// Distillation pair list for more than two branches: the hub pairs with
// every spoke, spokes never pair with each other.
std::vector<std::pair<int, int>> hub_spoke_pairs(std::span<const int> branch_ids, int hub);

struct EvalRow {
  std::string model;  // "merged", "branch0", ...
  std::string domain;
  double accuracy = 0.0;
};

struct TrainResult {
  Policy final_model;
  std::vector<BranchState> branches;
  long total_updates = 0;
  std::vector<EvalRow> final_evals;
};

// Drives one run in the configured mode. Writes per-cycle branch
// checkpoints and a final merged.ckpt under cfg.out_dir, streams metric
// rows to `writer`, and asserts the mode's update budget at the end.
// Output is byte-identical for any worker count.
TrainResult run_training(const RunConfig& cfg, MetricsWriter& writer, int workers = 1);

// The alternating-phase core, exposed so the phases can be driven and
// inspected directly. run_training composes this with mode-specific
// staging, checkpointing, and final evaluation.
class TrainSession {
 public:
  // writer may be null (no metric rows). Branches start at zero params.
  TrainSession(const RunConfig& cfg, MetricsWriter* writer, int workers);

  // Phase I: cfg.schedule s_rl synchronized steps, each branch running
  // GRPO on its own domain.
  void run_rlvr_phase(int cycle);

  // Phase II: s_opd synchronized steps. Every branch takes a mixed step:
  // a native sub-batch plus, when cross is enabled, one cross sub-batch
  // per teacher under the configured topology, built from peer snapshots
  // taken at the start of the step.
  void run_mutual_opd_phase(int cycle, bool cross_enabled);

  // One union-batch GRPO step over all branch domains round-robin,
  // applied to branch 0 (mixed-rlvr mode).
  void run_union_step(int cycle);

  // One frozen-teacher distillation step for `student` (no native batch).
  // Teachers are addressed by branch index. Used by static-OPD and mOPD
  // staging after expert training.
  void run_distill_step(BranchState& student, std::span<const int> teacher_ids, int cycle);

  std::vector<BranchState>& branches() { return branches_; }
  const std::vector<BranchState>& branches() const { return branches_; }
  const Policy& initial_policy() const { return theta0_; }
  const Domain& domain_of(const BranchState& b) const { return domains_.at(b.domain_id); }
  long global_step() const { return global_step_; }
  long updates_applied() const;

  // Behavioral distance rows for every pair under the topology, measured
  // from both sides' probe states, at the current step.
  void measure_pairs(int cycle, const std::string& phase);

 private:
  struct StepPlan;
  std::vector<std::vector<int>> draw_prompts(const Domain& domain, int count,
                                             int branch_id, int cycle, int phase, int step,
                                             const std::string& kind,
                                             int kind_index) const;
  std::vector<std::vector<int>> maybe_pass_filter(const Domain& domain, const Policy& policy,
                                                  std::vector<std::vector<int>> prompts,
                                                  int branch_id, int cycle, int phase,
                                                  int step);
  std::uint64_t step_seed(int branch_id, int cycle, int phase, int step) const;
  std::vector<std::pair<int, int>> pair_list() const;
  void log_step_row(const BranchState& b, int cycle, const std::string& phase,
                    const StepStats& stats, const std::map<std::string, double>& extra);
  void run_synchronized(int cycle, int phase, int steps, bool cross_enabled,
                        const std::string& label);

  const RunConfig cfg_;
  MetricsWriter* writer_;
  int workers_;
  std::map<std::string, Domain> domains_;
  std::vector<BranchState> branches_;
  Policy theta0_;
  long global_step_ = 0;
};

}  // namespace copd

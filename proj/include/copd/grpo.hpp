#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "copd/branch.hpp"
#include "copd/domains.hpp"
#include "copd/rollout.hpp"

namespace copd {

// Asymmetric ratio clip: [1 - eps_low, 1 + eps_high].
struct ClipBounds {
  double eps_low = 0.2;
  double eps_high = 0.28;
  void validate() const;
};

struct GroupAdvantages {
  std::vector<double> values;
  bool degenerate = false;  // zero-variance group, advantages forced to 0
};

// (r - mean) / population_std over one rollout group.
GroupAdvantages group_advantages(std::span<const double> rewards);

// min(ratio * advantage, clip(ratio) * advantage).
double clipped_surrogate(double ratio, double advantage, const ClipBounds& bounds);

// Hyperparameters shared by the RL and distillation step kinds.
struct GrpoParams {
  int group_size = 8;
  ClipBounds bounds;
  double kl_coeff = 0.0;       // weight of KL(pi || reference); 0 disables
  double learning_rate = 0.05;
  double temperature = 1.0;    // sampling only; losses stay at temperature 1
  int max_len = 4;
};

struct StepStats {
  std::optional<double> mean_reward;        // native rollouts, when any
  std::optional<double> cross_mean_reward;  // cross rollouts scored by teacher domains
  double mean_abs_advantage = 0.0;
  double clip_fraction = 0.0;
  long token_count = 0;
  bool any_degenerate_group = false;
};

// One on-policy update: samples group_size rollouts per prompt from the
// branch policy, verifies them, group-normalizes rewards into advantages,
// and ascends the length-normalized clipped surrogate (mean over rollouts).
// With kl_reference set and kl_coeff > 0, a per-state KL(pi || ref) penalty
// is included. Pure: returns the stepped branch, input untouched.
std::pair<BranchState, StepStats> grpo_step(const BranchState& branch, const Domain& domain,
                                            std::span<const std::vector<int>> prompts,
                                            const GrpoParams& params,
                                            const Policy* kl_reference, std::uint64_t seed);

namespace detail {

// Sampled groups plus their normalized advantages, before flattening into
// token-level jobs. Shared by the pure-RL step and the mixed-phase step.
struct NativeBatch {
  std::vector<std::vector<Rollout>> groups;
  std::vector<std::vector<double>> advantages;
  double reward_sum = 0.0;
  long rollout_count = 0;
  bool any_degenerate = false;
};

NativeBatch sample_native_groups(const Policy& policy, const Domain& domain,
                                 std::span<const std::vector<int>> prompts,
                                 const GrpoParams& params, std::uint64_t seed);

// A rollout with one advantage per completion token.
struct RolloutJob {
  const Rollout* rollout = nullptr;
  std::span<const double> token_advantages;
};

struct SurrogateTotals {
  double abs_advantage_sum = 0.0;
  long clipped_terms = 0;
  long token_terms = 0;
};

// Accumulates the ascent gradient of
//   (1/|jobs|) sum_r (1/|y_r|) sum_t [ min(rho A, clip(rho) A) - kl_coeff KL_t ]
// into acc. Ratios compare the temperature-1 policy against the stored
// behavior log-probs. Clipped terms contribute zero gradient.
void accumulate_clipped_surrogate(const Policy& policy, std::span<const RolloutJob> jobs,
                                  const ClipBounds& bounds, double kl_coeff,
                                  const Policy* kl_reference, std::span<double> acc,
                                  SurrogateTotals& totals);

}  // namespace detail

}  // namespace copd

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copd/branch.hpp"
#include "copd/domains.hpp"
#include "copd/grpo.hpp"

namespace copd {

// Forward KL D(teacher || student) between two next-token distributions.
// Zero-probability teacher entries contribute nothing; a zero student entry
// under teacher mass is a hard numeric error.
double opd_kl(std::span<const double> teacher_dist, std::span<const double> student_dist);

// Per-token distillation signal: teacher log-prob minus student log-prob
// of the token the student actually sampled.
inline double teacher_delta(double teacher_logprob, double student_logprob) {
  return teacher_logprob - student_logprob;
}

// Frozen copy of a peer's parameters, exchanged at the start of each
// distillation step so both sides of a pair see a stable teacher.
struct TeacherSnapshot {
  Policy policy;
  std::string source_branch;
  long taken_at_step = 0;
};

// How the cross signal enters the update.
//   kDelta:  teacher deltas ride the clipped surrogate as token advantages.
//   kFullKl: full-distribution descent on KL(teacher || student) per state.
enum class OpdLossForm { kDelta, kFullKl };

// Student-sampled rollouts on teacher-domain prompts, with the teacher
// delta for every emitted token. No group normalization is applied to
// deltas; their sign and scale are the signal.
struct CrossBatch {
  std::vector<std::vector<int>> prompts;
  std::vector<std::vector<Rollout>> rollout_groups;             // [prompt][g]
  std::vector<std::vector<std::vector<double>>> token_deltas;   // [prompt][g][t]
  double beta = 1.0;
};

CrossBatch build_cross_batch(const Policy& student, const TeacherSnapshot& teacher,
                             std::span<const std::vector<int>> prompts, int group_size,
                             int max_len, double temperature, double beta,
                             std::uint64_t seed);

// beta * delta per token, shaped like token_deltas.
std::vector<std::vector<std::vector<double>>> cross_branch_advantages(const CrossBatch& batch);

// One teacher's contribution to a mixed step: its snapshot, the domain its
// prompts come from (used to score cross rollouts for monitoring), and the
// prompts themselves.
struct TeacherFeed {
  const TeacherSnapshot* snapshot = nullptr;
  const Domain* domain = nullptr;
  std::vector<std::vector<int>> prompts;
};

// One Phase II update: a native GRPO sub-batch plus one cross sub-batch per
// teacher, each averaged over its own rollouts, summed into a single ascent
// direction and applied once. The same clip bounds and length normalization
// cover both kinds. A branch with beta = 0 skips cross sampling entirely,
// making the step bit-identical to grpo_step on the native prompts.
std::pair<BranchState, StepStats> mixed_phase_step(
    const BranchState& branch, const Domain& native_domain,
    std::span<const std::vector<int>> native_prompts, std::span<const TeacherFeed> teachers,
    const GrpoParams& params, OpdLossForm loss_form, const Policy* kl_reference,
    std::uint64_t seed);

}  // namespace copd

#include "copd/opd.hpp"

#include <cmath>

#include "copd/errors.hpp"
#include "copd/seeding.hpp"

namespace copd {

double opd_kl(std::span<const double> teacher_dist, std::span<const double> student_dist) {
  if (teacher_dist.size() != student_dist.size())
    throw ConfigError("opd_kl distribution sizes differ");
  double kl = 0.0;
  for (size_t i = 0; i < teacher_dist.size(); ++i) {
    const double t = teacher_dist[i];
    if (t <= 0.0) continue;
    if (student_dist[i] <= 0.0)
      throw NumericError("opd_kl: student assigns zero mass where teacher has support");
    kl += t * (std::log(t) - std::log(student_dist[i]));
  }
  return kl;
}

CrossBatch build_cross_batch(const Policy& student, const TeacherSnapshot& teacher,
                             std::span<const std::vector<int>> prompts, int group_size,
                             int max_len, double temperature, double beta,
                             std::uint64_t seed) {
  if (beta < 0.0) throw ConfigError("beta must be nonnegative");
  if (group_size < 1) throw ConfigError("cross batch group_size must be at least 1");
  if (student.vocab != teacher.policy.vocab || student.window != teacher.policy.window)
    throw ConfigError("student and teacher policies have different shapes");
  CrossBatch batch;
  batch.beta = beta;
  batch.prompts.assign(prompts.begin(), prompts.end());
  batch.rollout_groups.resize(prompts.size());
  batch.token_deltas.resize(prompts.size());
  const SeedChain root = SeedChain(seed);
  for (size_t i = 0; i < prompts.size(); ++i) {
    const SeedChain per_prompt = root.child(static_cast<std::uint64_t>(i));
    for (int g = 0; g < group_size; ++g) {
      Rollout r = sample_rollout(student, prompts[i], max_len, temperature,
                                 per_prompt.child(static_cast<std::uint64_t>(g)).value());
      // Deltas compare temperature-1 log-probs on the student's trajectory.
      const std::vector<double> t_lp =
          completion_logprobs(teacher.policy, r.prompt, r.completion, 1.0);
      const std::vector<double> s_lp =
          completion_logprobs(student, r.prompt, r.completion, 1.0);
      std::vector<double> deltas(t_lp.size());
      for (size_t t = 0; t < t_lp.size(); ++t) deltas[t] = teacher_delta(t_lp[t], s_lp[t]);
      batch.rollout_groups[i].push_back(std::move(r));
      batch.token_deltas[i].push_back(std::move(deltas));
    }
  }
  return batch;
}

std::vector<std::vector<std::vector<double>>> cross_branch_advantages(const CrossBatch& batch) {
  if (batch.beta < 0.0) throw ConfigError("beta must be nonnegative");
  auto adv = batch.token_deltas;
  for (auto& group : adv) {
    for (auto& per_rollout : group) {
      for (double& d : per_rollout) d *= batch.beta;
    }
  }
  return adv;
}

namespace {

// Full-distribution form: walk each cross rollout and push the student
// toward the teacher's next-token distribution at every visited state.
// Ascent direction of -KL(T || pi) is (T - pi) on the active columns.
void accumulate_full_kl(const Policy& student, const TeacherSnapshot& teacher,
                        const CrossBatch& batch, double beta, std::span<double> acc) {
  long rollouts = 0;
  for (const auto& group : batch.rollout_groups) rollouts += static_cast<long>(group.size());
  if (rollouts == 0) return;
  const double inv = 1.0 / static_cast<double>(rollouts);
  for (const auto& group : batch.rollout_groups) {
    for (const Rollout& r : group) {
      if (r.completion.empty()) continue;
      const double w = beta * inv / static_cast<double>(r.completion.size());
      std::vector<int> seq = r.prompt;
      for (int tok : r.completion) {
        const ContextWindow ctx = ContextWindow::trailing(student.vocab, seq, student.window);
        const std::vector<double> p = next_token_distribution(student, ctx, 1.0);
        const std::vector<double> t = next_token_distribution(teacher.policy, ctx, 1.0);
        detail::axpy_cross_entropy_gradient(student, ctx, p, t, w, acc);
        seq.push_back(tok);
      }
    }
  }
}

}  // namespace

std::pair<BranchState, StepStats> mixed_phase_step(
    const BranchState& branch, const Domain& native_domain,
    std::span<const std::vector<int>> native_prompts, std::span<const TeacherFeed> teachers,
    const GrpoParams& params, OpdLossForm loss_form, const Policy* kl_reference,
    std::uint64_t seed) {
  const bool cross_active = branch.beta > 0.0 && !teachers.empty();
  if (native_prompts.empty() && !cross_active)
    throw ConfigError("mixed_phase_step has neither native prompts nor an active teacher");

  std::vector<double> acc(branch.policy.params.size(), 0.0);
  detail::SurrogateTotals totals;
  StepStats stats;

  if (!native_prompts.empty()) {
    const detail::NativeBatch batch =
        detail::sample_native_groups(branch.policy, native_domain, native_prompts, params, seed);
    std::vector<std::vector<double>> token_adv;
    std::vector<detail::RolloutJob> jobs;
    for (size_t i = 0; i < batch.groups.size(); ++i) {
      for (size_t g = 0; g < batch.groups[i].size(); ++g) {
        token_adv.emplace_back(batch.groups[i][g].completion.size(), batch.advantages[i][g]);
        jobs.push_back({&batch.groups[i][g], token_adv.back()});
      }
    }
    detail::accumulate_clipped_surrogate(branch.policy, jobs, params.bounds, params.kl_coeff,
                                         kl_reference, acc, totals);
    stats.mean_reward = batch.reward_sum / static_cast<double>(batch.rollout_count);
    stats.any_degenerate_group = batch.any_degenerate;
  }

  if (cross_active) {
    const SeedChain cross_root = SeedChain(seed).child("cross");
    double cross_reward_sum = 0.0;
    long cross_rollouts = 0;
    for (size_t ti = 0; ti < teachers.size(); ++ti) {
      const TeacherFeed& feed = teachers[ti];
      if (feed.snapshot == nullptr || feed.domain == nullptr)
        throw ConfigError("teacher feed is missing a snapshot or domain");
      if (feed.prompts.empty()) continue;
      const CrossBatch batch = build_cross_batch(
          branch.policy, *feed.snapshot, feed.prompts, params.group_size, params.max_len,
          params.temperature, branch.beta, cross_root.child(ti).value());
      for (const auto& group : batch.rollout_groups) {
        for (const Rollout& r : group) {
          cross_reward_sum += feed.domain->verify(r.prompt, r.completion);
          ++cross_rollouts;
        }
      }
      if (loss_form == OpdLossForm::kFullKl) {
        accumulate_full_kl(branch.policy, *feed.snapshot, batch, branch.beta, acc);
        // Deltas still drive the advantage statistic so both forms report
        // a comparable signal magnitude.
        for (const auto& group : cross_branch_advantages(batch)) {
          for (const auto& per_rollout : group) {
            for (double a : per_rollout) {
              totals.abs_advantage_sum += std::abs(a);
              ++totals.token_terms;
            }
          }
        }
      } else {
        const auto advantages = cross_branch_advantages(batch);
        std::vector<detail::RolloutJob> jobs;
        for (size_t i = 0; i < batch.rollout_groups.size(); ++i) {
          for (size_t g = 0; g < batch.rollout_groups[i].size(); ++g) {
            jobs.push_back({&batch.rollout_groups[i][g], advantages[i][g]});
          }
        }
        detail::accumulate_clipped_surrogate(branch.policy, jobs, params.bounds, 0.0, nullptr,
                                             acc, totals);
      }
    }
    if (cross_rollouts > 0)
      stats.cross_mean_reward = cross_reward_sum / static_cast<double>(cross_rollouts);
  }

  BranchState next = branch;
  next.policy = apply_update(branch.policy, acc, params.learning_rate);
  next.step_counter = branch.step_counter + 1;
  stats.mean_abs_advantage =
      totals.token_terms ? totals.abs_advantage_sum / static_cast<double>(totals.token_terms) : 0.0;
  stats.clip_fraction =
      totals.token_terms ? static_cast<double>(totals.clipped_terms) /
                               static_cast<double>(totals.token_terms)
                         : 0.0;
  stats.token_count = totals.token_terms;
  return {std::move(next), stats};
}

}  // namespace copd

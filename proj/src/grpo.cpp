#include "copd/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "copd/errors.hpp"
#include "copd/seeding.hpp"

namespace copd {

void ClipBounds::validate() const {
  if (!(eps_low > 0.0) || !(eps_low < 1.0))
    throw ConfigError("eps_low must lie in (0, 1)");
  if (!(eps_high > 0.0)) throw ConfigError("eps_high must be positive");
}

GroupAdvantages group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ConfigError("advantage group needs at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance, matching the group-as-population view
  GroupAdvantages out;
  out.values.assign(rewards.begin(), rewards.end());
  if (var <= 1e-24) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  const double inv_std = 1.0 / std::sqrt(var);
  for (double& v : out.values) v = (v - mean) * inv_std;
  return out;
}

double clipped_surrogate(double ratio, double advantage, const ClipBounds& bounds) {
  bounds.validate();
  const double clipped = std::clamp(ratio, 1.0 - bounds.eps_low, 1.0 + bounds.eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace detail {

NativeBatch sample_native_groups(const Policy& policy, const Domain& domain,
                                 std::span<const std::vector<int>> prompts,
                                 const GrpoParams& params, std::uint64_t seed) {
  if (params.group_size < 2) throw ConfigError("group_size must be at least 2");
  const SeedChain root = SeedChain(seed).child("rollout");
  NativeBatch batch;
  batch.groups.resize(prompts.size());
  batch.advantages.resize(prompts.size());
  for (size_t i = 0; i < prompts.size(); ++i) {
    const SeedChain per_prompt = root.child(static_cast<std::uint64_t>(i));
    std::vector<double> rewards(static_cast<size_t>(params.group_size));
    for (int g = 0; g < params.group_size; ++g) {
      Rollout r = sample_rollout(policy, prompts[i], params.max_len, params.temperature,
                                 per_prompt.child(static_cast<std::uint64_t>(g)).value());
      rewards[static_cast<size_t>(g)] =
          static_cast<double>(domain.verify(r.prompt, r.completion));
      batch.groups[i].push_back(std::move(r));
    }
    GroupAdvantages adv = group_advantages(rewards);
    batch.any_degenerate = batch.any_degenerate || adv.degenerate;
    if (!adv.degenerate) {
      double m = 0.0, v = 0.0;
      for (double a : adv.values) m += a;
      m /= static_cast<double>(adv.values.size());
      for (double a : adv.values) v += (a - m) * (a - m);
      v /= static_cast<double>(adv.values.size());
      if (std::abs(m) > 1e-9 || std::abs(std::sqrt(v) - 1.0) > 1e-6)
        throw NumericError("group advantages failed mean-0/std-1 check");
    }
    for (double r : rewards) batch.reward_sum += r;
    batch.rollout_count += params.group_size;
    batch.advantages[i] = std::move(adv.values);
  }
  return batch;
}

void accumulate_clipped_surrogate(const Policy& policy, std::span<const RolloutJob> jobs,
                                  const ClipBounds& bounds, double kl_coeff,
                                  const Policy* kl_reference, std::span<double> acc,
                                  SurrogateTotals& totals) {
  bounds.validate();
  if (kl_coeff > 0.0 && kl_reference == nullptr)
    throw ConfigError("kl_coeff > 0 requires a reference policy");
  if (jobs.empty()) return;
  const double lo = 1.0 - bounds.eps_low;
  const double hi = 1.0 + bounds.eps_high;
  const double inv_jobs = 1.0 / static_cast<double>(jobs.size());
  for (const RolloutJob& job : jobs) {
    const Rollout& r = *job.rollout;
    if (r.completion.empty()) continue;
    const double w = inv_jobs / static_cast<double>(r.completion.size());
    std::vector<int> seq = r.prompt;
    for (size_t t = 0; t < r.completion.size(); ++t) {
      const int tok = r.completion[t];
      const ContextWindow ctx = ContextWindow::trailing(policy.vocab, seq, policy.window);
      const std::vector<double> probs = next_token_distribution(policy, ctx, 1.0);
      const double ratio = std::exp(std::log(probs[tok]) - r.behavior_logprobs[t]);
      const double adv = job.token_advantages[t];
      const double clipped_ratio = std::clamp(ratio, lo, hi);
      ++totals.token_terms;
      totals.abs_advantage_sum += std::abs(adv);
      // min() gradient: the unclipped branch carries it; at a tie it still
      // flows, and a clipped-active term contributes nothing.
      if (ratio * adv <= clipped_ratio * adv) {
        axpy_logprob_gradient(policy, ctx, probs, tok, w * adv * ratio, acc);
      } else {
        ++totals.clipped_terms;
      }
      if (kl_coeff > 0.0) {
        const std::vector<double> ref =
            next_token_distribution(*kl_reference, ctx, 1.0);
        axpy_kl_gradient(policy, ctx, probs, ref, -kl_coeff * w, acc);
      }
      seq.push_back(tok);
    }
  }
}

}  // namespace detail

std::pair<BranchState, StepStats> grpo_step(const BranchState& branch, const Domain& domain,
                                            std::span<const std::vector<int>> prompts,
                                            const GrpoParams& params,
                                            const Policy* kl_reference, std::uint64_t seed) {
  if (prompts.empty()) throw ConfigError("grpo_step needs at least one prompt");

  const detail::NativeBatch batch =
      detail::sample_native_groups(branch.policy, domain, prompts, params, seed);

  // Flatten to per-token jobs: each rollout carries its group advantage on
  // every completion token.
  std::vector<std::vector<double>> token_adv;
  std::vector<detail::RolloutJob> jobs;
  token_adv.reserve(static_cast<size_t>(batch.rollout_count));
  jobs.reserve(static_cast<size_t>(batch.rollout_count));
  for (size_t i = 0; i < batch.groups.size(); ++i) {
    for (size_t g = 0; g < batch.groups[i].size(); ++g) {
      token_adv.emplace_back(batch.groups[i][g].completion.size(), batch.advantages[i][g]);
      jobs.push_back({&batch.groups[i][g], token_adv.back()});
    }
  }

  std::vector<double> acc(branch.policy.params.size(), 0.0);
  detail::SurrogateTotals totals;
  detail::accumulate_clipped_surrogate(branch.policy, jobs, params.bounds, params.kl_coeff,
                                       kl_reference, acc, totals);

  BranchState next = branch;
  next.policy = apply_update(branch.policy, acc, params.learning_rate);
  next.step_counter = branch.step_counter + 1;

  StepStats stats;
  stats.mean_reward = batch.reward_sum / static_cast<double>(batch.rollout_count);
  stats.mean_abs_advantage =
      totals.token_terms ? totals.abs_advantage_sum / static_cast<double>(totals.token_terms) : 0.0;
  stats.clip_fraction =
      totals.token_terms ? static_cast<double>(totals.clipped_terms) /
                               static_cast<double>(totals.token_terms)
                         : 0.0;
  stats.token_count = totals.token_terms;
  stats.any_degenerate_group = batch.any_degenerate;
  return {std::move(next), stats};
}

}  // namespace copd

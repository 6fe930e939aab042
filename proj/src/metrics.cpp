#include "copd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "copd/errors.hpp"
#include "copd/opd.hpp"
#include "copd/rollout.hpp"
#include "copd/seeding.hpp"

namespace copd {

ProbeSet collect_probe_states(const Policy& policy,
                              std::span<const std::vector<int>> prompts,
                              int rollouts_per_prompt, std::uint64_t seed, int max_len,
                              std::string source_policy) {
  if (prompts.empty()) throw ConfigError("collect_probe_states needs prompts");
  if (rollouts_per_prompt < 1) throw ConfigError("rollouts_per_prompt must be at least 1");
  ProbeSet out;
  out.seed = seed;
  out.source_policy = std::move(source_policy);
  const SeedChain root = SeedChain(seed).child("probe");
  for (size_t i = 0; i < prompts.size(); ++i) {
    const SeedChain per_prompt = root.child(static_cast<std::uint64_t>(i));
    for (int s = 0; s < rollouts_per_prompt; ++s) {
      const Rollout r = sample_rollout(policy, prompts[i], max_len, 1.0,
                                       per_prompt.child(static_cast<std::uint64_t>(s)).value());
      for (size_t t = 0; t < r.completion.size(); ++t) {
        out.states.push_back(
            {prompts[i], std::vector<int>(r.completion.begin(), r.completion.begin() + t)});
      }
    }
  }
  return out;
}

std::vector<int> top_k_tokens(std::span<const double> dist, int k) {
  const int v = static_cast<int>(dist.size());
  if (k < 1 || k > v) throw ConfigError("top-k size must lie in [1, vocab size]");
  std::vector<int> ids(static_cast<size_t>(v));
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  ids.resize(static_cast<size_t>(k));
  return ids;
}

namespace {

std::vector<double> state_distribution(const Policy& p, const ProbeState& s) {
  std::vector<int> seq = s.prompt;
  seq.insert(seq.end(), s.prefix.begin(), s.prefix.end());
  const ContextWindow ctx = ContextWindow::trailing(p.vocab, seq, p.window);
  return next_token_distribution(p, ctx, 1.0);
}

double jeffreys(const std::vector<double>& pa, const std::vector<double>& pb) {
  const double d = opd_kl(pa, pb) + opd_kl(pb, pa);
  if (!std::isfinite(d)) throw NumericError("non-finite symmetric KL");
  return d;
}

}  // namespace

OverlapReport top_k_overlap(const Policy& a, const Policy& b, const ProbeSet& probes, int k) {
  if (a.vocab != b.vocab || a.window != b.window)
    throw ConfigError("policies under comparison have different shapes");
  if (probes.states.empty()) throw ConfigError("probe set is empty");
  OverlapReport rep;
  rep.k = k;
  double kl_sum = 0.0;
  for (const ProbeState& s : probes.states) {
    const std::vector<double> pa = state_distribution(a, s);
    const std::vector<double> pb = state_distribution(b, s);
    const std::vector<int> ta = top_k_tokens(pa, k);
    const std::vector<int> tb = top_k_tokens(pb, k);
    int common = 0;
    for (int id : ta) {
      if (std::find(tb.begin(), tb.end(), id) != tb.end()) ++common;
    }
    rep.per_state.push_back(static_cast<double>(common) / static_cast<double>(k));
    kl_sum += jeffreys(pa, pb);
  }
  rep.mean_overlap = std::accumulate(rep.per_state.begin(), rep.per_state.end(), 0.0) /
                     static_cast<double>(rep.per_state.size());
  rep.sym_kl_mean = kl_sum / static_cast<double>(probes.states.size());
  return rep;
}

double symmetric_kl(const Policy& a, const Policy& b, const ProbeSet& probes) {
  if (a.vocab != b.vocab || a.window != b.window)
    throw ConfigError("policies under comparison have different shapes");
  if (probes.states.empty()) throw ConfigError("probe set is empty");
  double sum = 0.0;
  for (const ProbeState& s : probes.states) {
    sum += jeffreys(state_distribution(a, s), state_distribution(b, s));
  }
  return sum / static_cast<double>(probes.states.size());
}

}  // namespace copd

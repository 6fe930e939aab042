#include "copd/rollout.hpp"

#include <cmath>
#include <random>

#include "copd/errors.hpp"

namespace copd {

namespace {

// Uniform double in [0, 1) from the top 53 bits of an mt19937_64 draw.
// std::uniform_real_distribution is implementation-defined across standard
// libraries; this mapping is not.
double next_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Inverse-CDF sample walking token ids in ascending order, so the draw is
// a pure function of (dist, u).
int sample_index(const std::vector<double>& dist, double u) {
  double cum = 0.0;
  for (size_t i = 0; i < dist.size(); ++i) {
    cum += dist[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(dist.size()) - 1;  // guards rounding at u ~ 1
}

}  // namespace

Rollout sample_rollout(const Policy& policy, std::span<const int> prompt, int max_len,
                       double temperature, std::uint64_t seed) {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  Rollout r;
  r.prompt.assign(prompt.begin(), prompt.end());
  r.seed = seed;
  std::mt19937_64 gen(seed);
  std::vector<int> seq = r.prompt;
  for (int t = 0; t < max_len; ++t) {
    const ContextWindow ctx = ContextWindow::trailing(policy.vocab, seq, policy.window);
    const std::vector<double> dist = next_token_distribution(policy, ctx, temperature);
    const int tok = sample_index(dist, next_uniform(gen));
    r.completion.push_back(tok);
    r.behavior_logprobs.push_back(std::log(dist[tok]));
    seq.push_back(tok);
    if (tok == policy.vocab.eos) break;
  }
  return r;
}

std::vector<int> greedy_completion(const Policy& policy, std::span<const int> prompt,
                                   int max_len) {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<int> out;
  for (int t = 0; t < max_len; ++t) {
    const ContextWindow ctx = ContextWindow::trailing(policy.vocab, seq, policy.window);
    const std::vector<double> z = logits(policy, ctx);
    int best = 0;
    for (int i = 1; i < policy.vocab.size; ++i) {
      if (z[i] > z[best]) best = i;
    }
    out.push_back(best);
    seq.push_back(best);
    if (best == policy.vocab.eos) break;
  }
  return out;
}

std::vector<double> completion_logprobs(const Policy& policy, std::span<const int> prompt,
                                        std::span<const int> completion,
                                        double temperature) {
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<double> lps;
  lps.reserve(completion.size());
  for (int tok : completion) {
    if (!policy.vocab.contains(tok)) throw ConfigError("completion token id out of range");
    const ContextWindow ctx = ContextWindow::trailing(policy.vocab, seq, policy.window);
    const std::vector<double> dist = next_token_distribution(policy, ctx, temperature);
    lps.push_back(std::log(dist[tok]));
    seq.push_back(tok);
  }
  return lps;
}

}  // namespace copd

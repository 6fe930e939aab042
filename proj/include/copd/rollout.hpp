#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "copd/policy.hpp"

namespace copd {

// One sampled completion plus the log-probabilities the generating policy
// assigned to each emitted token at the sampling temperature. Re-evaluating
// the same policy on the trajectory reproduces behavior_logprobs exactly.
struct Rollout {
  std::vector<int> prompt;
  std::vector<int> completion;  // includes EOS when it was emitted
  std::vector<double> behavior_logprobs;
  std::uint64_t seed = 0;
};

// Autoregressive sampling, stopping at EOS or after max_len tokens.
// Deterministic in (policy, prompt, temperature, seed), bit-identical
// across platforms and thread counts.
Rollout sample_rollout(const Policy& policy, std::span<const int> prompt, int max_len,
                       double temperature, std::uint64_t seed);

// Greedy argmax decoding, ties broken toward the lowest token id.
std::vector<int> greedy_completion(const Policy& policy, std::span<const int> prompt,
                                   int max_len);

// Log-probabilities a policy assigns to an existing completion, token by
// token, at the given temperature.
std::vector<double> completion_logprobs(const Policy& policy, std::span<const int> prompt,
                                        std::span<const int> completion,
                                        double temperature = 1.0);

}  // namespace copd

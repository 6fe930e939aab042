#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "copd/policy.hpp"

namespace copd {

// A decision point: prompt plus the completion prefix already emitted.
struct ProbeState {
  std::vector<int> prompt;
  std::vector<int> prefix;
};

struct ProbeSet {
  std::vector<ProbeState> states;
  std::string source_policy;
  std::uint64_t seed = 0;
};

// States visited by `policy` when sampling the given prompts at temperature
// 1. Every emitted token contributes the state it was sampled from, so a
// length-L completion yields L states. Repeat visits are kept: the probe
// set is a draw from the visitation distribution, not a dedup of it.
ProbeSet collect_probe_states(const Policy& policy,
                              std::span<const std::vector<int>> prompts,
                              int rollouts_per_prompt, std::uint64_t seed, int max_len,
                              std::string source_policy = {});

// Token ids of the k largest probabilities, ties broken toward the lower id
// so the set is unique and platform-independent.
std::vector<int> top_k_tokens(std::span<const double> dist, int k);

struct OverlapReport {
  int k = 0;
  double mean_overlap = 0.0;
  std::vector<double> per_state;
  double sym_kl_mean = 0.0;
};

// Mean top-k intersection |TopK_a n TopK_b| / k over the probe states,
// with the per-state values and the matching symmetric KL for free.
OverlapReport top_k_overlap(const Policy& a, const Policy& b, const ProbeSet& probes, int k);

// Mean of KL(a || b) + KL(b || a) over the probe states.
double symmetric_kl(const Policy& a, const Policy& b, const ProbeSet& probes);

}  // namespace copd

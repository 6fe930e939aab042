#include <doctest.h>

#include <cmath>
#include <vector>

#include "copd/policy.hpp"
#include "copd/rollout.hpp"

#include "helpers.hpp"

using namespace copd;
using testutil::policy_with_bos_logits;

namespace {
const Vocab kV4{4, 2, 3};
}

TEST_SUITE("rollout") {

TEST_CASE("an eos-dominant policy stops immediately") {
  const Policy p = policy_with_bos_logits(kV4, 2, {0.0, 0.0, 0.0, 50.0});
  const Rollout r = sample_rollout(p, std::vector<int>{}, 5, 1.0, 123);
  CHECK(r.completion == std::vector<int>{kV4.eos});
  CHECK(r.behavior_logprobs.size() == 1);
  CHECK(r.behavior_logprobs[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("same seed reproduces the rollout, different seeds explore") {
  const Policy p = Policy::zeros(kV4, 3);
  const std::vector<int> prompt{0, 1};
  const Rollout a = sample_rollout(p, prompt, 6, 1.0, 42);
  const Rollout b = sample_rollout(p, prompt, 6, 1.0, 42);
  CHECK(a.completion == b.completion);
  CHECK(a.behavior_logprobs == b.behavior_logprobs);

  bool any_difference = false;
  for (std::uint64_t s = 0; s < 20 && !any_difference; ++s)
    any_difference = sample_rollout(p, prompt, 6, 1.0, s).completion != a.completion;
  CHECK(any_difference);
}

TEST_CASE("uniform policy assigns ln(1/4) to every sampled token") {
  const Policy p = Policy::zeros(kV4, 2);
  const Rollout r = sample_rollout(p, std::vector<int>{1}, 3, 1.0, 7);
  CHECK(!r.behavior_logprobs.empty());
  for (double lp : r.behavior_logprobs)
    CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("behavior logprobs equal re-scored completion logprobs at the sampling temperature") {
  Policy p = Policy::zeros(kV4, 3);
  p.params = testutil::random_params(p.params.size(), 77, 1.0);
  for (double temp : {0.5, 1.0, 2.0}) {
    const Rollout r = sample_rollout(p, std::vector<int>{0}, 5, temp, 99);
    const auto rescored = completion_logprobs(p, r.prompt, r.completion, temp);
    CHECK(rescored == r.behavior_logprobs);
  }
}

TEST_CASE("greedy decoding breaks ties toward the lowest token id") {
  const Policy p = Policy::zeros(kV4, 2);
  const auto completion = greedy_completion(p, std::vector<int>{}, 3);
  CHECK(completion == std::vector<int>{0, 0, 0});
}

TEST_CASE("greedy decoding follows the dominant logit and stops at eos") {
  Policy p = policy_with_bos_logits(kV4, 2, {0.0, 5.0, 0.0, 0.0});
  // After emitting token 1 the context slot content changes; steer the
  // follow-up to EOS through the token-1 column of the last slot.
  p.at(kV4.eos, 1 * kV4.size + 1) = 9.0;
  const auto completion = greedy_completion(p, std::vector<int>{}, 5);
  CHECK(completion == std::vector<int>{1, kV4.eos});
}

TEST_CASE("sampling frequencies track the distribution") {
  const Policy p = policy_with_bos_logits(kV4, 2, {1.0, 0.0, -1.0, 0.5});
  const ContextWindow ctx = ContextWindow::trailing(kV4, std::vector<int>{}, 2);
  const auto dist = next_token_distribution(p, ctx, 1.0);
  const int n = 50000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) {
    const Rollout r = sample_rollout(p, std::vector<int>{}, 1, 1.0,
                                     static_cast<std::uint64_t>(i) * 2654435761ull + 17);
    ++counts[static_cast<size_t>(r.completion[0])];
  }
  for (int v = 0; v < 4; ++v) {
    const double se = std::sqrt(dist[v] * (1.0 - dist[v]) / n);
    CHECK(std::abs(counts[v] / static_cast<double>(n) - dist[v]) < 3.5 * se);
  }
}

TEST_CASE("max_len caps completions even without eos") {
  // token 0 dominates in every context, so eos is never reached
  Policy p = Policy::zeros(kV4, 2);
  for (int col = 0; col < p.cols(); ++col) p.at(0, col) = 50.0;
  const Rollout r = sample_rollout(p, std::vector<int>{}, 4, 1.0, 5);
  CHECK(r.completion == std::vector<int>{0, 0, 0, 0});
}

}  // TEST_SUITE

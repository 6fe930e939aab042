#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "copd/domains.hpp"
#include "copd/errors.hpp"
#include "copd/metrics.hpp"

#include "helpers.hpp"

using namespace copd;
using testutil::policy_with_bos_logits;

namespace {
const Vocab kV4{4, 2, 3};

std::vector<std::vector<int>> two_prompts() { return {{0}, {1}}; }
}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("every completion token contributes one probe state") {
  // Token 0 dominates, EOS never fires: completions are exactly max_len
  // long, so each rollout adds max_len prefix states.
  const Policy p = policy_with_bos_logits(kV4, 2, {50.0, 0.0, 0.0, 0.0});
  const ProbeSet probes = collect_probe_states(p, two_prompts(), 1, 7, 3);
  CHECK(probes.states.size() == 6);
  int zero_len = 0;
  for (const auto& s : probes.states) {
    if (s.prefix.empty()) ++zero_len;
    CHECK(s.prefix.size() < 3);
  }
  CHECK(zero_len == 2);  // one fresh-start state per prompt rollout
}

TEST_CASE("probe collection is seed-deterministic") {
  const Policy p = Policy::zeros(kV4, 2);
  const ProbeSet a = collect_probe_states(p, two_prompts(), 2, 99, 3);
  const ProbeSet b = collect_probe_states(p, two_prompts(), 2, 99, 3);
  REQUIRE(a.states.size() == b.states.size());
  for (size_t i = 0; i < a.states.size(); ++i) {
    CHECK(a.states[i].prompt == b.states[i].prompt);
    CHECK(a.states[i].prefix == b.states[i].prefix);
  }
  const ProbeSet c = collect_probe_states(p, two_prompts(), 2, 100, 3);
  bool differs = c.states.size() != a.states.size();
  for (size_t i = 0; !differs && i < a.states.size(); ++i)
    differs = a.states[i].prefix != c.states[i].prefix;
  CHECK(differs);
}

TEST_CASE("top-k token selection orders by probability then id") {
  const std::vector<double> dist{0.1, 0.4, 0.1, 0.4};
  CHECK(top_k_tokens(dist, 2) == std::vector<int>{1, 3});
  CHECK(top_k_tokens(dist, 3) == std::vector<int>{1, 3, 0});
  CHECK_THROWS_AS(top_k_tokens(dist, 0), ConfigError);
  CHECK_THROWS_AS(top_k_tokens(dist, 5), ConfigError);
}

TEST_CASE("identical policies overlap fully and diverge nowhere") {
  Policy p = Policy::zeros(kV4, 2);
  p.params = testutil::random_params(p.params.size(), 15, 1.0);
  const ProbeSet probes = collect_probe_states(p, two_prompts(), 2, 3, 3);
  const OverlapReport rep = top_k_overlap(p, p, probes, 2);
  CHECK(rep.mean_overlap == 1.0);
  CHECK(rep.sym_kl_mean == 0.0);
  for (double o : rep.per_state) CHECK(o == 1.0);
}

TEST_CASE("full-vocabulary k always overlaps fully") {
  Policy a = Policy::zeros(kV4, 2);
  a.params = testutil::random_params(a.params.size(), 1, 1.0);
  Policy b = Policy::zeros(kV4, 2);
  b.params = testutil::random_params(b.params.size(), 2, 1.0);
  const ProbeSet probes = collect_probe_states(a, two_prompts(), 1, 9, 2);
  const OverlapReport rep = top_k_overlap(a, b, probes, kV4.size);
  CHECK(rep.mean_overlap == 1.0);
  CHECK(rep.sym_kl_mean > 0.0);
}

TEST_CASE("a constructed half-overlap case") {
  // Top-2 sets {0,1} vs {1,2} share exactly one token on the fresh state.
  const Policy a = policy_with_bos_logits(kV4, 1, {5.0, 4.0, 0.0, -1.0});
  const Policy b = policy_with_bos_logits(kV4, 1, {0.0, 4.0, 5.0, -1.0});
  ProbeSet probes;
  probes.states.push_back({{}, {}});
  const OverlapReport rep = top_k_overlap(a, b, probes, 2);
  CHECK(rep.mean_overlap == 0.5);
}

TEST_CASE("symmetric kl agrees with the overlap report and swaps cleanly") {
  Policy a = Policy::zeros(kV4, 2);
  a.params = testutil::random_params(a.params.size(), 4, 1.5);
  Policy b = Policy::zeros(kV4, 2);
  b.params = testutil::random_params(b.params.size(), 5, 1.5);
  const ProbeSet probes = collect_probe_states(a, two_prompts(), 2, 21, 3);
  const OverlapReport rep = top_k_overlap(a, b, probes, 2);
  const double direct = symmetric_kl(a, b, probes);
  CHECK(rep.sym_kl_mean == doctest::Approx(direct).epsilon(1e-12));
  CHECK(symmetric_kl(b, a, probes) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("mismatched shapes and empty probe sets are rejected") {
  const Policy a = Policy::zeros(kV4, 2);
  const Policy b = Policy::zeros(kV4, 3);
  ProbeSet empty;
  CHECK_THROWS_AS(top_k_overlap(a, b, empty, 2), ConfigError);
  const ProbeSet probes = collect_probe_states(a, two_prompts(), 1, 1, 2);
  CHECK_THROWS_AS(top_k_overlap(a, b, probes, 2), ConfigError);
  CHECK_THROWS_AS(symmetric_kl(a, a, empty), ConfigError);
}

}  // TEST_SUITE

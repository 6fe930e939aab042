#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

#include "copd/domains.hpp"
#include "copd/errors.hpp"
#include "copd/rollout.hpp"

#include "helpers.hpp"

using namespace copd;
namespace tok = copd::tokens;

TEST_SUITE("domains") {

TEST_CASE("the three domains exist and unknown ids are rejected") {
  CHECK(domain_ids() == std::vector<std::string>{"modsum", "reverse", "parity"});
  CHECK_THROWS_AS(make_domain("sorting"), ConfigError);
}

TEST_CASE("generation is deterministic in the seed") {
  const Domain d = make_domain("modsum");
  const PromptCase a = d.generate(42);
  const PromptCase b = d.generate(42);
  CHECK(a.prompt == b.prompt);
  CHECK(a.target == b.target);
  CHECK(a.prompt == std::vector<int>{tok::kTagModsum, 1, 3, tok::kSep});
  CHECK(a.target == std::vector<int>{4});
}

TEST_CASE("prompt shape: tag, two digits, separator") {
  for (const auto& id : domain_ids()) {
    const Domain d = make_domain(id);
    for (std::uint64_t s = 0; s < 30; ++s) {
      const PromptCase c = d.generate(s);
      REQUIRE(c.prompt.size() == 4);
      CHECK(c.prompt[1] < tok::kDigits);
      CHECK(c.prompt[2] < tok::kDigits);
      CHECK(c.prompt[3] == tok::kSep);
    }
  }
}

TEST_CASE("targets follow each domain's rule") {
  const Domain modsum = make_domain("modsum");
  const Domain reverse = make_domain("reverse");
  const Domain parity = make_domain("parity");
  for (std::uint64_t s = 0; s < 50; ++s) {
    const PromptCase m = modsum.generate(s);
    CHECK(m.target == std::vector<int>{(m.prompt[1] + m.prompt[2]) % 7});
    CHECK(m.prompt[1] + m.prompt[2] < 7);  // eligible payloads never wrap

    const PromptCase r = reverse.generate(s);
    CHECK(r.target == std::vector<int>{r.prompt[2], r.prompt[1]});

    const PromptCase p = parity.generate(s);
    CHECK(p.target == std::vector<int>{p.prompt[1] % 2});
  }
}

TEST_CASE("the same payload means different things in different domains") {
  // payload (2, 3): sum 5, reversed [3, 2], leading parity 0
  const std::vector<int> base{0, 2, 3, tok::kSep};
  auto with_tag = [&](int tag) {
    std::vector<int> p = base;
    p[0] = tag;
    return p;
  };
  CHECK(make_domain("modsum").verify(with_tag(tok::kTagModsum),
                                     std::vector<int>{5, tok::kEos}) == 1);
  CHECK(make_domain("reverse").verify(with_tag(tok::kTagReverse),
                                      std::vector<int>{3, 2, tok::kEos}) == 1);
  CHECK(make_domain("parity").verify(with_tag(tok::kTagParity),
                                     std::vector<int>{0, tok::kEos}) == 1);
}

TEST_CASE("verify demands the exact target plus eos") {
  const Domain d = make_domain("modsum");
  const PromptCase c = d.generate(3);
  std::vector<int> good = c.target;
  good.push_back(tok::kEos);
  CHECK(d.verify(c.prompt, good) == 1);
  CHECK(d.verify(c.prompt, {}) == 0);

  std::vector<int> flipped = good;
  flipped[0] = (flipped[0] + 1) % 7;
  CHECK(d.verify(c.prompt, flipped) == 0);

  std::vector<int> no_eos = c.target;
  CHECK(d.verify(c.prompt, no_eos) == 0);

  std::vector<int> extra = good;
  extra.push_back(0);
  CHECK(d.verify(c.prompt, extra) == 0);
}

TEST_CASE("verify scores payloads regardless of the prompt's tag token") {
  const Domain modsum = make_domain("modsum");
  const std::vector<int> foreign{tok::kTagReverse, 2, 4, tok::kSep};
  CHECK(modsum.verify(foreign, std::vector<int>{6, tok::kEos}) == 1);
  CHECK(modsum.verify(foreign, std::vector<int>{4, 2, tok::kEos}) == 0);
}

TEST_CASE("malformed prompts score zero") {
  const Domain d = make_domain("parity");
  CHECK(d.verify(std::vector<int>{tok::kTagParity, 1, 2}, std::vector<int>{1, tok::kEos}) == 0);
  CHECK(d.verify(std::vector<int>{tok::kTagParity, tok::kSep, 2, tok::kSep},
                 std::vector<int>{0, tok::kEos}) == 0);
  CHECK(d.verify(std::vector<int>{tok::kTagParity, 1, 2, 0},
                 std::vector<int>{1, tok::kEos}) == 0);
}

TEST_CASE("training pool covers the payload space, eval is a fixed subset") {
  const Domain modsum = make_domain("modsum");
  CHECK(modsum.train_set().size() == 16);  // digits 0..3 both slots
  CHECK(modsum.eval_set().size() == 4);    // max(4, 16/5)
  const Domain reverse = make_domain("reverse");
  CHECK(reverse.train_set().size() == 49);
  CHECK(reverse.eval_set().size() == 9);  // max(4, 49/5)

  std::set<std::vector<int>> train_prompts, eval_prompts;
  for (const auto& c : modsum.train_set()) train_prompts.insert(c.prompt);
  for (const auto& c : modsum.eval_set()) eval_prompts.insert(c.prompt);
  CHECK(train_prompts.size() == 16);
  CHECK(eval_prompts.size() == 4);
  for (const auto& p : eval_prompts) CHECK(train_prompts.count(p) == 1);
}

TEST_CASE("eval split is frozen") {
  const Domain d = make_domain("modsum");
  std::ostringstream os;
  write_eval_set(d, os);
  CHECK(os.str() == "8 3 0 7\n8 3 3 7\n8 0 2 7\n8 0 1 7\n");
}

TEST_CASE("hand-built optimal policies reach accuracy 1 on the full eval set") {
  for (const auto& id : domain_ids()) {
    const Domain d = make_domain(id);
    const Policy oracle = testutil::oracle_for(id);
    CHECK(eval_accuracy(oracle, d, 0, 1, d.max_completion_len()) == 1.0);
  }
}

TEST_CASE("zero-parameter greedy accuracy matches a brute-force enumeration") {
  // Independent oracle: greedy from all-zero params always emits token 0
  // (lowest id wins ties), so no completion ever terminates with EOS and
  // every eval case scores 0.
  const Policy theta0 = Policy::zeros(task_vocab(), 6);
  for (const auto& id : domain_ids()) {
    const Domain d = make_domain(id);
    double oracle_acc = 0.0;
    for (const auto& c : d.eval_set()) {
      const std::vector<int> greedy(4, 0);  // what argmax-of-zeros produces
      oracle_acc += d.verify(c.prompt, greedy);
    }
    oracle_acc /= static_cast<double>(d.eval_set().size());
    CHECK(oracle_acc == 0.0);
    CHECK(eval_accuracy(theta0, d, 0, 9, 4) == oracle_acc);
  }
}

TEST_CASE("eval subsampling is deterministic and bounded by the split") {
  const Domain d = make_domain("reverse");
  const Policy oracle = testutil::reverse_oracle();
  CHECK(eval_accuracy(oracle, d, 4, 5, 3) == 1.0);
  CHECK(eval_accuracy(oracle, d, 4, 5, 3) == eval_accuracy(oracle, d, 4, 5, 3));
  CHECK(eval_accuracy(oracle, d, 1000, 5, 3) == 1.0);  // clamped to the split
}

TEST_CASE("max completion length covers target plus eos") {
  CHECK(make_domain("modsum").max_completion_len() == 2);
  CHECK(make_domain("reverse").max_completion_len() == 3);
  CHECK(make_domain("parity").max_completion_len() == 2);
}

TEST_CASE("pass-rate filter keeps only prompts with interior pass counts") {
  SUBCASE("a policy that always fails leaves nothing") {
    // EOS-dominant: completion [EOS] never matches target+EOS.
    const Domain d = make_domain("modsum");
    std::vector<std::vector<int>> prompts;
    for (int i = 0; i < 6; ++i) prompts.push_back(d.train_set()[static_cast<size_t>(i)].prompt);
    Policy p = Policy::zeros(task_vocab(), 6);
    for (int c = 0; c < p.cols(); ++c) p.at(tok::kEos, c) = 50.0;
    CHECK(pass_rate_filter(d, p, prompts, 8, 4, 1.0, 1).empty());
  }
  SUBCASE("a policy that always succeeds leaves nothing") {
    // reverse oracle: strict margins everywhere, so 50x saturation makes
    // sampling deterministic (modsum has exact ties on the 0+0 payload)
    const Domain d = make_domain("reverse");
    std::vector<std::vector<int>> prompts;
    for (int i = 0; i < 6; ++i) prompts.push_back(d.train_set()[static_cast<size_t>(i)].prompt);
    Policy p = testutil::reverse_oracle();
    for (double& x : p.params) x *= 50.0;
    CHECK(pass_rate_filter(d, p, prompts, 8, 4, 1.0, 1).empty());
  }
  SUBCASE("a mid-strength policy retains a deterministic subset") {
    const Domain d = make_domain("modsum");
    std::vector<std::vector<int>> prompts;
    for (int i = 0; i < 6; ++i) prompts.push_back(d.train_set()[static_cast<size_t>(i)].prompt);
    Policy p = testutil::modsum_oracle();
    for (double& x : p.params) x *= 0.45;
    const auto kept = pass_rate_filter(d, p, prompts, 8, 4, 1.0, 3);
    const auto again = pass_rate_filter(d, p, prompts, 8, 4, 1.0, 3);
    CHECK(kept == again);
    CHECK(!kept.empty());
    CHECK(kept.size() < prompts.size());
    for (const auto& q : kept)
      CHECK(std::find(prompts.begin(), prompts.end(), q) != prompts.end());
  }
}

}  // TEST_SUITE

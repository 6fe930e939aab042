#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copd/policy.hpp"
#include "copd/rollout.hpp"

namespace copd {

// Shared token table for all built-in task domains:
//   0..6   digit tokens
//   7      SEP, closes the prompt
//   8..10  domain tags (modsum, reverse, parity)
//   11     BOS (left padding only)
//   12     EOS
namespace tokens {
inline constexpr int kDigits = 7;
inline constexpr int kSep = 7;
inline constexpr int kTagModsum = 8;
inline constexpr int kTagReverse = 9;
inline constexpr int kTagParity = 10;
inline constexpr int kBos = 11;
inline constexpr int kEos = 12;
inline constexpr int kVocabSize = 13;
}  // namespace tokens

const Vocab& task_vocab();

struct PromptCase {
  std::vector<int> prompt;
  std::vector<int> target;  // without the trailing EOS
};

// A verifiable task over the shared vocab. Prompts are [TAG d1 d2 SEP];
// the reward-1 completion is the domain's target followed by EOS, exact
// match, nothing else accepted. Training draws cover the whole payload
// space; eval_set is a fixed seeded subset of it used as the measurement
// list (its prompts are fixtures, never produced by the seeds a training
// loop feeds to generate()).
//
// The three built-ins pull against each other on purpose: they share the
// digit alphabet, so what one domain wants a digit context to predict is
// wrong for the others.
//   modsum   target (d1 + d2) mod 7. Generated payloads use digits 0..3,
//            so the sum stays inside the digit range; the verifier still
//            scores any digit pair.
//   reverse  target [d2, d1].
//   parity   target (d1 mod 2) as a single digit token.
class Domain {
 public:
  const std::string& id() const { return id_; }
  const Vocab& vocab() const { return task_vocab(); }

  // Deterministic draw from the training pool (all payloads).
  PromptCase generate(std::uint64_t seed) const;

  // Binary reward. Recomputes the target from the prompt payload alone, so
  // any (prompt, completion) pair can be scored, including prompts written
  // by another domain's generator; malformed prompts score 0.
  int verify(std::span<const int> prompt, std::span<const int> completion) const;

  const std::vector<PromptCase>& eval_set() const { return eval_; }
  const std::vector<PromptCase>& train_set() const { return train_; }

  // Longest reward-1 completion, EOS included.
  int max_completion_len() const;

 private:
  friend Domain make_domain(std::string_view id);
  enum class Kind { kModsum, kReverse, kParity };
  Domain(Kind kind, std::string id);
  std::vector<int> target_for(int d1, int d2) const;

  Kind kind_;
  std::string id_;
  std::vector<PromptCase> train_;
  std::vector<PromptCase> eval_;
};

Domain make_domain(std::string_view id);  // throws ConfigError for unknown ids
const std::vector<std::string>& domain_ids();

// Exact-match accuracy of greedy decoding over the eval split. n_prompts = 0
// uses the full split; otherwise a seeded subsample without replacement.
double eval_accuracy(const Policy& policy, const Domain& domain, int n_prompts,
                     std::uint64_t seed, int max_len);

// Keeps only prompts whose sampled pass rate is strictly between 0 and 1,
// i.e. prompts that still carry a learning signal. n_samples must be >= 2.
std::vector<std::vector<int>> pass_rate_filter(const Domain& domain, const Policy& policy,
                                               std::span<const std::vector<int>> prompts,
                                               int n_samples, int max_len,
                                               double temperature, std::uint64_t seed);

// One line per eval prompt, token ids space-separated. Targets are not
// stored; verify() recomputes them.
void write_eval_set(const Domain& domain, std::ostream& out);

}  // namespace copd

#include "copd/domains.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include "copd/errors.hpp"
#include "copd/seeding.hpp"

namespace copd {

const Vocab& task_vocab() {
  static const Vocab v{tokens::kVocabSize, tokens::kBos, tokens::kEos};
  return v;
}

namespace {

bool is_digit_token(int t) { return t >= 0 && t < tokens::kDigits; }

// Portable Fisher-Yates; std::shuffle's draw sequence is not pinned by the
// standard, so it cannot back a frozen train/eval split.
template <typename T>
void deterministic_shuffle(std::vector<T>& xs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  for (size_t i = xs.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(gen() % i);
    std::swap(xs[i - 1], xs[j]);
  }
}

}  // namespace

Domain::Domain(Kind kind, std::string id) : kind_(kind), id_(std::move(id)) {
  const int tag = kind_ == Kind::kModsum    ? tokens::kTagModsum
                  : kind_ == Kind::kReverse ? tokens::kTagReverse
                                            : tokens::kTagParity;
  std::vector<std::pair<int, int>> payloads;
  // modsum payloads stay within digits 0..3: sums never wrap past 6, and
  // every digit value shares four payloads, which keeps the additive
  // argmax structure well-conditioned for a linear learner (corner digits
  // that appear in a single payload make its margins pathologically thin)
  const int digit_limit = kind_ == Kind::kModsum ? 4 : tokens::kDigits;
  for (int a = 0; a < digit_limit; ++a) {
    for (int b = 0; b < digit_limit; ++b) {
      payloads.emplace_back(a, b);
    }
  }
  deterministic_shuffle(payloads, SeedChain(0x5eedu).child(id_).value());
  // Roughly a fifth of the payload space forms the fixed measurement list.
  // The training pool is the full space: with a payload set this small, a
  // payload-disjoint eval split would ask the linear policy to extrapolate
  // argmax structure to unseen digit pairs, which its one-hot features
  // cannot support in general.
  const size_t eval_n = std::max<size_t>(4, payloads.size() / 5);
  for (size_t i = 0; i < payloads.size(); ++i) {
    const auto [a, b] = payloads[i];
    PromptCase c;
    c.prompt = {tag, a, b, tokens::kSep};
    c.target = target_for(a, b);
    if (i < eval_n) eval_.push_back(c);
    train_.push_back(std::move(c));
  }
}

std::vector<int> Domain::target_for(int d1, int d2) const {
  switch (kind_) {
    case Kind::kModsum:
      return {(d1 + d2) % tokens::kDigits};
    case Kind::kReverse:
      return {d2, d1};
    case Kind::kParity:
      return {d1 % 2};
  }
  throw ConfigError("unreachable domain kind");
}

PromptCase Domain::generate(std::uint64_t seed) const {
  const size_t i = static_cast<size_t>(splitmix64(seed ^ 0x9e3779b9u) % train_.size());
  return train_[i];
}

int Domain::verify(std::span<const int> prompt, std::span<const int> completion) const {
  if (prompt.size() != 4) return 0;
  if (prompt[3] != tokens::kSep) return 0;
  if (!is_digit_token(prompt[1]) || !is_digit_token(prompt[2])) return 0;
  const std::vector<int> target = target_for(prompt[1], prompt[2]);
  if (completion.size() != target.size() + 1) return 0;
  for (size_t i = 0; i < target.size(); ++i) {
    if (completion[i] != target[i]) return 0;
  }
  return completion.back() == tokens::kEos ? 1 : 0;
}

int Domain::max_completion_len() const { return kind_ == Kind::kReverse ? 3 : 2; }

Domain make_domain(std::string_view id) {
  if (id == "modsum") return Domain(Domain::Kind::kModsum, "modsum");
  if (id == "reverse") return Domain(Domain::Kind::kReverse, "reverse");
  if (id == "parity") return Domain(Domain::Kind::kParity, "parity");
  throw ConfigError("unknown domain id '" + std::string(id) +
                    "' (known: modsum, reverse, parity)");
}

const std::vector<std::string>& domain_ids() {
  static const std::vector<std::string> ids = {"modsum", "reverse", "parity"};
  return ids;
}

double eval_accuracy(const Policy& policy, const Domain& domain, int n_prompts,
                     std::uint64_t seed, int max_len) {
  const auto& full = domain.eval_set();
  std::vector<size_t> idx(full.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (n_prompts > 0 && static_cast<size_t>(n_prompts) < full.size()) {
    deterministic_shuffle(idx, SeedChain(seed).child("eval-subset").value());
    idx.resize(static_cast<size_t>(n_prompts));
    std::sort(idx.begin(), idx.end());
  }
  if (idx.empty()) throw ConfigError("empty eval set");
  double hits = 0.0;
  for (size_t i : idx) {
    const std::vector<int> comp = greedy_completion(policy, full[i].prompt, max_len);
    hits += domain.verify(full[i].prompt, comp);
  }
  return hits / static_cast<double>(idx.size());
}

std::vector<std::vector<int>> pass_rate_filter(const Domain& domain, const Policy& policy,
                                               std::span<const std::vector<int>> prompts,
                                               int n_samples, int max_len,
                                               double temperature, std::uint64_t seed) {
  if (n_samples < 2) throw ConfigError("pass_rate_filter needs n_samples >= 2");
  std::vector<std::vector<int>> kept;
  const SeedChain root = SeedChain(seed).child("pass-filter");
  for (size_t i = 0; i < prompts.size(); ++i) {
    int passes = 0;
    const SeedChain per_prompt = root.child(static_cast<std::uint64_t>(i));
    for (int s = 0; s < n_samples; ++s) {
      const Rollout r = sample_rollout(policy, prompts[i], max_len, temperature,
                                       per_prompt.child(static_cast<std::uint64_t>(s)).value());
      passes += domain.verify(r.prompt, r.completion);
    }
    if (passes > 0 && passes < n_samples) kept.push_back(prompts[i]);
  }
  return kept;
}

void write_eval_set(const Domain& domain, std::ostream& out) {
  for (const PromptCase& c : domain.eval_set()) {
    for (size_t i = 0; i < c.prompt.size(); ++i) {
      if (i) out << ' ';
      out << c.prompt[i];
    }
    out << '\n';
  }
}

}  // namespace copd

// Shared test fixtures: hand-constructed optimal policies for the three
// task domains, independent finite-difference machinery, and small
// utilities. The oracle policies are built from first principles here so
// library training code is never its own referee.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "copd/domains.hpp"
#include "copd/policy.hpp"

namespace testutil {

using copd::Policy;
using copd::Vocab;
namespace tok = copd::tokens;

inline constexpr int kWindow = 6;

// Column of (slot, token) in the flattened parameter row.
inline int col(int slot, int token) { return slot * tok::kVocabSize + token; }

// Prompts are [TAG, d1, d2, SEP]; with window 6 the contexts seen while
// emitting are:
//   step 1: [BOS, BOS, TAG, d1, d2, SEP]   (slots 0..5)
//   step 2: [BOS, TAG, d1, d2, SEP, y1]
//   step 3: [TAG, d1, d2, SEP, y1, y2]

// Emits (d1 + d2) then EOS. Works because eligible prompts keep d1+d2 < 7,
// so the mod never wraps. Scoring a digit v from slot 3 (d1=a) and slot 4
// (d2=b) as 2av - a^2 + 2bv - b^2 - v^2 = 2ab - (v - a - b)^2 peaks
// uniquely at v = a + b; ties at zero resolve toward the digit because
// digit ids precede every other id.
inline Policy modsum_oracle() {
  Policy p = Policy::zeros(copd::task_vocab(), kWindow);
  const double alpha = 2.0;
  for (int v = 0; v < tok::kDigits; ++v) {
    for (int d = 0; d < tok::kDigits; ++d) {
      p.at(v, col(3, d)) += alpha * (2.0 * d * v - d * d);
      p.at(v, col(4, d)) += alpha * (2.0 * d * v - d * d - v * v);
    }
  }
  // At step 2 the separator sits in slot 4 and no digit bonus can reach
  // 400, so EOS takes over exactly after the answer digit.
  p.at(tok::kEos, col(4, tok::kSep)) = 400.0;
  return p;
}

// Emits d2, d1, EOS. Slot 4 holds d2 at step 1, slot 2 holds d1 at step 2,
// and the separator reaches slot 3 only at step 3.
inline Policy reverse_oracle() {
  Policy p = Policy::zeros(copd::task_vocab(), kWindow);
  const double c = 10.0;
  for (int d = 0; d < tok::kDigits; ++d) {
    p.at(d, col(4, d)) += c;
    p.at(d, col(2, d)) += c;
  }
  p.at(tok::kEos, col(3, tok::kSep)) = 3.0 * c;
  return p;
}

// Emits d1 % 2 then EOS. Slot 3 holds d1 at step 1; at step 2 the
// separator reaches slot 4 and the doubled EOS bonus dominates the single
// parity bonus that slot 3 (now d2) still contributes.
inline Policy parity_oracle() {
  Policy p = Policy::zeros(copd::task_vocab(), kWindow);
  const double c = 10.0;
  for (int d = 0; d < tok::kDigits; ++d) p.at(d % 2, col(3, d)) += c;
  p.at(tok::kEos, col(4, tok::kSep)) = 2.0 * c;
  return p;
}

inline Policy oracle_for(const std::string& domain_id) {
  if (domain_id == "modsum") return modsum_oracle();
  if (domain_id == "reverse") return reverse_oracle();
  return parity_oracle();
}

// Policy whose first-token logits over a fresh (all-BOS) context are the
// given per-token scores; used to pin softmax and top-k examples.
inline Policy policy_with_bos_logits(const Vocab& vocab, int window,
                                     const std::vector<double>& scores) {
  Policy p = Policy::zeros(vocab, window);
  // An empty prefix pads every slot with BOS, so one column carries the
  // whole score.
  for (int v = 0; v < static_cast<int>(scores.size()); ++v) {
    p.at(v, vocab.bos) = scores[v];
  }
  return p;
}

inline std::vector<double> random_params(size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> out(n);
  for (double& x : out) x = u(gen);
  return out;
}

// Central finite difference of f along coordinate i.
template <typename F>
double central_difference(F&& f, std::vector<double> params, size_t i, double h) {
  params[i] += h;
  const double up = f(params);
  params[i] -= 2.0 * h;
  const double down = f(params);
  return (up - down) / (2.0 * h);
}

}  // namespace testutil

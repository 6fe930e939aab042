#pragma once

#include <span>
#include <vector>

#include "copd/vocab.hpp"

namespace copd {

// The last `window` token ids before the prediction point, oldest first,
// left-padded with BOS when the sequence is shorter than the window.
class ContextWindow {
 public:
  explicit ContextWindow(std::vector<int> tokens) : tokens_(std::move(tokens)) {}

  static ContextWindow trailing(const Vocab& vocab, std::span<const int> prefix,
                                int window);

  const std::vector<int>& tokens() const { return tokens_; }
  int window() const { return static_cast<int>(tokens_.size()); }

  // One-hot encoding per slot, concatenated oldest-slot first.
  std::vector<double> feature(const Vocab& vocab) const;

 private:
  std::vector<int> tokens_;
};

// Linear-softmax autoregressive policy: logits = params * feature(context).
// params is row-major, one row per output token, window*vocab.size columns.
// Column w*vocab.size + t is the weight of token t appearing in slot w.
struct Policy {
  Vocab vocab;
  int window = 0;
  std::vector<double> params;

  static Policy zeros(const Vocab& vocab, int window);

  int rows() const { return vocab.size; }
  int cols() const { return window * vocab.size; }

  double at(int row, int col) const { return params[static_cast<size_t>(row) * cols() + col]; }
  double& at(int row, int col) { return params[static_cast<size_t>(row) * cols() + col]; }
};

// Raw scores for every next token. Throws NumericError if any is non-finite.
std::vector<double> logits(const Policy& policy, const ContextWindow& ctx);

// softmax(logits / temperature). temperature must be positive.
std::vector<double> next_token_distribution(const Policy& policy,
                                            const ContextWindow& ctx,
                                            double temperature);

// Temperature-1 log-softmax. All losses and metrics use this form.
std::vector<double> log_softmax(const Policy& policy, const ContextWindow& ctx);

// Analytic gradient of log pi(token | ctx) with respect to params, as a
// dense vector in params layout: (onehot(token) - softmax) outer feature.
std::vector<double> logprob_gradient(const Policy& policy, const ContextWindow& ctx,
                                     int token);

// Pure gradient-ascent step: returns a new policy, input untouched.
Policy apply_update(const Policy& policy, std::span<const double> ascent_direction,
                    double learning_rate);

namespace detail {

// Sparse accumulation used by the training loops: for each output row v,
// adds weight * ((v == token) - probs[v]) at the window*vocab columns the
// context actually activates. probs must be the temperature-1 distribution.
void axpy_logprob_gradient(const Policy& policy, const ContextWindow& ctx,
                           std::span<const double> probs, int token, double weight,
                           std::span<double> acc);

// Gradient of KL(pi_theta || ref) at this context, same sparse layout.
// d/d logit_u = p_u * (log(p_u / q_u) - KL).
void axpy_kl_gradient(const Policy& policy, const ContextWindow& ctx,
                      std::span<const double> probs, std::span<const double> ref_probs,
                      double weight, std::span<double> acc);

// Ascent direction of the full-distribution distillation term
// -KL(teacher || pi_theta): adds weight * (teacher[v] - probs[v]).
void axpy_cross_entropy_gradient(const Policy& policy, const ContextWindow& ctx,
                                 std::span<const double> probs,
                                 std::span<const double> teacher_probs, double weight,
                                 std::span<double> acc);

}  // namespace detail

}  // namespace copd

#include "copd/policy.hpp"

#include <algorithm>
#include <cmath>

#include "copd/errors.hpp"

namespace copd {

ContextWindow ContextWindow::trailing(const Vocab& vocab, std::span<const int> prefix,
                                      int window) {
  if (window < 1) throw ConfigError("context window must be at least 1");
  std::vector<int> toks(static_cast<size_t>(window), vocab.bos);
  const int n = static_cast<int>(prefix.size());
  const int take = std::min(window, n);
  for (int i = 0; i < take; ++i) {
    const int t = prefix[n - take + i];
    if (!vocab.contains(t)) throw ConfigError("context token id out of range");
    toks[window - take + i] = t;
  }
  return ContextWindow(std::move(toks));
}

std::vector<double> ContextWindow::feature(const Vocab& vocab) const {
  std::vector<double> f(static_cast<size_t>(window()) * vocab.size, 0.0);
  for (int w = 0; w < window(); ++w) f[static_cast<size_t>(w) * vocab.size + tokens_[w]] = 1.0;
  return f;
}

Policy Policy::zeros(const Vocab& vocab, int window) {
  vocab.validate();
  if (window < 1) throw ConfigError("policy window must be at least 1");
  Policy p;
  p.vocab = vocab;
  p.window = window;
  p.params.assign(static_cast<size_t>(vocab.size) * window * vocab.size, 0.0);
  return p;
}

std::vector<double> logits(const Policy& policy, const ContextWindow& ctx) {
  const int v = policy.vocab.size;
  std::vector<double> z(static_cast<size_t>(v), 0.0);
  // The feature is one-hot per slot, so the matrix product reduces to
  // summing one column per window slot.
  for (int w = 0; w < policy.window; ++w) {
    const int col = w * v + ctx.tokens()[w];
    const double* base = policy.params.data() + col;
    const size_t stride = static_cast<size_t>(policy.cols());
    for (int r = 0; r < v; ++r) z[r] += base[stride * r];
  }
  for (double x : z) {
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
  }
  return z;
}

namespace {

std::vector<double> softmax_of(std::vector<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : z) x /= sum;
  return z;
}

}  // namespace

std::vector<double> next_token_distribution(const Policy& policy,
                                            const ContextWindow& ctx,
                                            double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  std::vector<double> z = logits(policy, ctx);
  for (double& x : z) x /= temperature;
  return softmax_of(std::move(z));
}

std::vector<double> log_softmax(const Policy& policy, const ContextWindow& ctx) {
  std::vector<double> z = logits(policy, ctx);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  const double lse = m + std::log(sum);
  for (double& x : z) x -= lse;
  return z;
}

std::vector<double> logprob_gradient(const Policy& policy, const ContextWindow& ctx,
                                     int token) {
  if (!policy.vocab.contains(token)) throw ConfigError("gradient token id out of range");
  const std::vector<double> p = next_token_distribution(policy, ctx, 1.0);
  std::vector<double> g(policy.params.size(), 0.0);
  detail::axpy_logprob_gradient(policy, ctx, p, token, 1.0, g);
  return g;
}

Policy apply_update(const Policy& policy, std::span<const double> ascent_direction,
                    double learning_rate) {
  if (ascent_direction.size() != policy.params.size())
    throw ConfigError("update direction has wrong size");
  Policy out = policy;
  for (size_t i = 0; i < out.params.size(); ++i) {
    out.params[i] += learning_rate * ascent_direction[i];
    if (!std::isfinite(out.params[i])) throw NumericError("non-finite parameter after update");
  }
  return out;
}

namespace detail {

void axpy_logprob_gradient(const Policy& policy, const ContextWindow& ctx,
                           std::span<const double> probs, int token, double weight,
                           std::span<double> acc) {
  const int v = policy.vocab.size;
  const size_t stride = static_cast<size_t>(policy.cols());
  for (int w = 0; w < policy.window; ++w) {
    const size_t col = static_cast<size_t>(w) * v + ctx.tokens()[w];
    for (int r = 0; r < v; ++r) {
      const double coeff = (r == token ? 1.0 : 0.0) - probs[r];
      acc[stride * r + col] += weight * coeff;
    }
  }
}

void axpy_kl_gradient(const Policy& policy, const ContextWindow& ctx,
                      std::span<const double> probs, std::span<const double> ref_probs,
                      double weight, std::span<double> acc) {
  const int v = policy.vocab.size;
  double kl = 0.0;
  std::vector<double> lr(static_cast<size_t>(v));
  for (int r = 0; r < v; ++r) {
    lr[r] = std::log(probs[r]) - std::log(ref_probs[r]);
    kl += probs[r] * lr[r];
  }
  const size_t stride = static_cast<size_t>(policy.cols());
  for (int w = 0; w < policy.window; ++w) {
    const size_t col = static_cast<size_t>(w) * v + ctx.tokens()[w];
    for (int r = 0; r < v; ++r) acc[stride * r + col] += weight * probs[r] * (lr[r] - kl);
  }
}

void axpy_cross_entropy_gradient(const Policy& policy, const ContextWindow& ctx,
                                 std::span<const double> probs,
                                 std::span<const double> teacher_probs, double weight,
                                 std::span<double> acc) {
  const int v = policy.vocab.size;
  const size_t stride = static_cast<size_t>(policy.cols());
  for (int w = 0; w < policy.window; ++w) {
    const size_t col = static_cast<size_t>(w) * v + ctx.tokens()[w];
    for (int r = 0; r < v; ++r) acc[stride * r + col] += weight * (teacher_probs[r] - probs[r]);
  }
}

}  // namespace detail

}  // namespace copd

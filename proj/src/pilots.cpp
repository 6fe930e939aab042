#include "copd/pilots.hpp"

#include <cmath>

#include "copd/branch.hpp"
#include "copd/domains.hpp"
#include "copd/errors.hpp"
#include "copd/grpo.hpp"
#include "copd/metrics.hpp"
#include "copd/opd.hpp"
#include "copd/orchestrator.hpp"
#include "copd/rollout.hpp"
#include "copd/seeding.hpp"
#include "copd/stats.hpp"

namespace copd {

namespace {

GrpoParams params_of(const RunConfig& cfg) {
  GrpoParams p;
  p.group_size = cfg.grpo.group_size;
  p.bounds = cfg.grpo.bounds;
  p.kl_coeff = cfg.grpo.kl_coeff;
  p.learning_rate = cfg.grpo.learning_rate;
  p.temperature = cfg.grpo.temperature;
  p.max_len = cfg.grpo.max_len;
  return p;
}

std::vector<std::vector<int>> draw_batch(const Domain& domain, int count, SeedChain root) {
  std::vector<std::vector<int>> prompts;
  prompts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    prompts.push_back(domain.generate(root.child(static_cast<std::uint64_t>(i)).value()).prompt);
  return prompts;
}

// Plain branch-specific RLVR loop used for pilot teachers and students.
BranchState train_rlvr(const RunConfig& cfg, const Domain& domain, int steps,
                       double temperature, SeedChain root) {
  BranchState b;
  b.policy = Policy::zeros(task_vocab(), cfg.window);
  b.domain_id = domain.id();
  GrpoParams params = params_of(cfg);
  params.temperature = temperature;
  for (int s = 0; s < steps; ++s) {
    const SeedChain step = root.child("step").child(static_cast<std::uint64_t>(s));
    const auto prompts = draw_batch(domain, cfg.grpo.batch, step.child("prompts"));
    b = grpo_step(b, domain, prompts, params, nullptr, step.child("update").value()).first;
  }
  return b;
}

ProbeSet probes_from(const Policy& policy, const Domain& domain, const RunConfig& cfg,
                     SeedChain root) {
  const auto prompts = draw_batch(domain, cfg.metrics.probe_prompts, root.child("prompts"));
  return collect_probe_states(policy, prompts, cfg.metrics.probe_rollouts,
                              root.child("states").value(), cfg.grpo.max_len);
}

// Greedy exact-match over the whole payload pool. The eval list is small by
// design, too coarse to rank five variants by gain; the pool gives the pilot
// the finest granularity the domain offers.
double pool_accuracy(const Policy& policy, const Domain& domain, int max_len) {
  int ok = 0;
  for (const PromptCase& c : domain.train_set())
    ok += domain.verify(c.prompt, greedy_completion(policy, c.prompt, max_len)) == 1;
  return static_cast<double>(ok) / static_cast<double>(domain.train_set().size());
}

}  // namespace

OverlapGainResult pilot_overlap_gain(const RunConfig& cfg, MetricsWriter& writer,
                                     const std::optional<Policy>& teacher_in) {
  if (cfg.branches.empty()) throw ConfigError("pilot needs a branch with a domain");
  const Domain domain = make_domain(cfg.branches.front().domain);
  const SeedChain root = SeedChain(cfg.seed).child("pilot-overlap");
  const GrpoParams params = params_of(cfg);

  Policy teacher = [&]() {
    if (teacher_in) {
      if (teacher_in->vocab != task_vocab() || teacher_in->window != cfg.window)
        throw ConfigError("supplied teacher does not match the configured policy shape");
      return *teacher_in;
    }
    if (cfg.pilot.teacher_steps < 1)
      throw ConfigError("pilot.teacher_steps is 0 and no teacher checkpoint was supplied");
    return train_rlvr(cfg, domain, cfg.pilot.teacher_steps, cfg.grpo.temperature,
                      root.child("teacher"))
        .policy;
  }();
  const TeacherSnapshot snap{teacher, "teacher", 0};

  // Student variants: short RLVR runs at different sampling temperatures
  // give genuinely different behavioral distances from the teacher; the
  // control is the teacher itself, for which distillation must be a no-op.
  struct Variant {
    Policy policy;
    double temperature;
    bool control;
  };
  std::vector<Variant> variants;
  for (size_t i = 0; i < cfg.pilot.temperatures.size(); ++i) {
    const double tau = cfg.pilot.temperatures[i];
    variants.push_back({train_rlvr(cfg, domain, cfg.pilot.student_steps, tau,
                                   root.child("student").child(i))
                            .policy,
                        tau, false});
  }
  variants.push_back({teacher, cfg.grpo.temperature, true});

  OverlapGainResult result;
  const int pool_n = static_cast<int>(domain.train_set().size());
  for (size_t vi = 0; vi < variants.size(); ++vi) {
    Variant& v = variants[vi];
    const SeedChain vroot = root.child("variant").child(vi);
    const ProbeSet probes = probes_from(v.policy, domain, cfg, vroot.child("probe"));
    const double overlap = top_k_overlap(v.policy, teacher, probes, cfg.metrics.k).mean_overlap;
    const double pre = pool_accuracy(v.policy, domain, cfg.grpo.max_len);

    BranchState student;
    student.policy = v.policy;
    student.domain_id = domain.id();
    student.beta = 1.0;
    for (int s = 0; s < cfg.pilot.distill_steps; ++s) {
      const SeedChain step = vroot.child("distill").child(static_cast<std::uint64_t>(s));
      TeacherFeed feed;
      feed.snapshot = &snap;
      feed.domain = &domain;
      feed.prompts = draw_batch(domain, cfg.grpo.batch, step.child("prompts"));
      const TeacherFeed feeds[1] = {std::move(feed)};
      student = mixed_phase_step(student, domain, {}, feeds, params, cfg.opd_loss_form,
                                 nullptr, step.child("update").value())
                    .first;
    }
    const double post = pool_accuracy(student.policy, domain, cfg.grpo.max_len);

    OverlapGainRow row;
    row.variant = static_cast<int>(vi);
    row.temperature = v.temperature;
    row.control = v.control;
    row.overlap = overlap;
    row.pre = pre;
    row.post = post;
    row.gain = post - pre;
    row.se = std::sqrt(binomial_se(pre, pool_n) * binomial_se(pre, pool_n) +
                       binomial_se(post, pool_n) * binomial_se(post, pool_n));
    writer.row({{"metric", "pilot_overlap_gain"},
                {"variant", row.variant},
                {"temperature", row.temperature},
                {"control", row.control},
                {"overlap", row.overlap},
                {"pre", row.pre},
                {"post", row.post},
                {"gain", row.gain},
                {"se", row.se}});
    result.rows.push_back(row);
  }

  std::vector<double> overlaps, gains;
  for (const OverlapGainRow& r : result.rows) {
    if (!r.control) {
      overlaps.push_back(r.overlap);
      gains.push_back(r.gain);
    }
  }
  // a one-variant run has no rank correlation to speak of; report it as
  // zero with the low-confidence flag instead of failing the whole pilot
  result.spearman =
      overlaps.size() < 2 ? 0.0 : spearman_rank_correlation(overlaps, gains);
  result.reduced_confidence = distinct_count(overlaps, 1e-3) < 3;
  writer.row({{"metric", "spearman"}, {"value", result.spearman}});
  writer.row({{"metric", "pilot_confidence"},
              {"reduced", result.reduced_confidence},
              {"distinct_overlap_levels", distinct_count(overlaps, 1e-3)}});
  return result;
}

std::vector<DriftPoint> pilot_drift(const RunConfig& cfg, MetricsWriter& writer) {
  if (cfg.branches.size() < 2)
    throw ConfigError("pilot-drift needs at least two configured branches");
  const SeedChain root = SeedChain(cfg.seed).child("pilot-drift");
  const GrpoParams params = params_of(cfg);
  const Policy theta0 = Policy::zeros(task_vocab(), cfg.window);

  std::vector<Domain> domains;
  std::vector<BranchState> branches;
  for (size_t i = 0; i < cfg.branches.size(); ++i) {
    domains.push_back(make_domain(cfg.branches[i].domain));
    BranchState b;
    b.id = static_cast<int>(i);
    b.policy = theta0;
    b.domain_id = cfg.branches[i].domain;
    branches.push_back(std::move(b));
  }

  std::vector<DriftPoint> points;
  auto measure = [&](long step) {
    for (size_t i = 0; i < branches.size(); ++i) {
      const SeedChain mroot = root.child("measure")
                                  .child(static_cast<std::uint64_t>(i))
                                  .child(static_cast<std::uint64_t>(step));
      const ProbeSet probes = probes_from(branches[i].policy, domains[i], cfg, mroot);
      const OverlapReport rep =
          top_k_overlap(branches[i].policy, theta0, probes, cfg.metrics.k);
      DriftPoint pt{branches[i].id, step, rep.mean_overlap, rep.sym_kl_mean};
      writer.row({{"metric", "pilot_drift"},
                  {"branch", pt.branch},
                  {"step", pt.step},
                  {"overlap", pt.overlap},
                  {"sym_kl", pt.sym_kl}});
      points.push_back(pt);
    }
  };

  measure(0);
  for (int s = 1; s <= cfg.pilot.total_steps; ++s) {
    for (size_t i = 0; i < branches.size(); ++i) {
      const SeedChain step = root.child("train")
                                 .child(static_cast<std::uint64_t>(i))
                                 .child(static_cast<std::uint64_t>(s));
      const auto prompts = draw_batch(domains[i], cfg.grpo.batch, step.child("prompts"));
      branches[i] =
          grpo_step(branches[i], domains[i], prompts, params, nullptr, step.child("update").value())
              .first;
    }
    if (s % cfg.pilot.interval == 0) measure(s);
  }
  return points;
}

}  // namespace copd

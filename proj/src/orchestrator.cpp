#include "copd/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>

#include "copd/checkpoint.hpp"
#include "copd/errors.hpp"
#include "copd/grpo.hpp"
#include "copd/metrics.hpp"
#include "copd/opd.hpp"
#include "copd/seeding.hpp"

namespace copd {

namespace {

// Phase tags used in seed derivation paths.
constexpr int kPhaseRl = 1;
constexpr int kPhaseOpd = 2;
constexpr int kPhaseDistill = 3;
constexpr int kPhaseMix = 4;

GrpoParams grpo_params_of(const RunConfig& cfg) {
  GrpoParams p;
  p.group_size = cfg.grpo.group_size;
  p.bounds = cfg.grpo.bounds;
  p.kl_coeff = cfg.grpo.kl_coeff;
  p.learning_rate = cfg.grpo.learning_rate;
  p.temperature = cfg.grpo.temperature;
  p.max_len = cfg.grpo.max_len;
  return p;
}

std::string pair_label(int a, int b) {
  if (a > b) std::swap(a, b);
  return std::to_string(a) + "-" + std::to_string(b);
}

}  // namespace

Policy merge(std::span<const Policy> policies, const MergeSpec& spec) {
  if (policies.empty()) throw ConfigError("merge needs at least one policy");
  if (spec.weights.size() != policies.size())
    throw ConfigError("merge needs one weight per policy");
  double sum = 0.0;
  for (double w : spec.weights) {
    if (w < 0.0) throw ConfigError("merge weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("merge weights must sum to 1");
  const Policy& first = policies.front();
  for (const Policy& p : policies) {
    if (p.vocab != first.vocab || p.window != first.window ||
        p.params.size() != first.params.size())
      throw ConfigError("merge policies have different shapes");
  }
  Policy out = Policy::zeros(first.vocab, first.window);
  for (size_t i = 0; i < policies.size(); ++i) {
    const double w = spec.weights[i];
    for (size_t j = 0; j < out.params.size(); ++j) out.params[j] += w * policies[i].params[j];
  }
  return out;
}

std::vector<std::pair<int, int>> hub_spoke_pairs(std::span<const int> branch_ids, int hub) {
  if (std::find(branch_ids.begin(), branch_ids.end(), hub) == branch_ids.end())
    throw ConfigError("hub is not in the branch list");
  std::vector<std::pair<int, int>> pairs;
  for (int id : branch_ids) {
    if (id != hub) pairs.emplace_back(hub, id);
  }
  return pairs;
}

TrainSession::TrainSession(const RunConfig& cfg, MetricsWriter* writer, int workers)
    : cfg_(cfg), writer_(writer), workers_(std::max(1, workers)),
      theta0_(Policy::zeros(task_vocab(), cfg.window)) {
  validate(cfg_);
  for (const BranchConfig& b : cfg_.branches) {
    if (!domains_.contains(b.domain)) domains_.emplace(b.domain, make_domain(b.domain));
  }
  for (size_t i = 0; i < cfg_.branches.size(); ++i) {
    BranchState s;
    s.id = static_cast<int>(i);
    s.policy = theta0_;
    s.domain_id = cfg_.branches[i].domain;
    s.beta = cfg_.branches[i].beta;
    branches_.push_back(std::move(s));
  }
}

long TrainSession::updates_applied() const {
  long total = 0;
  for (const BranchState& b : branches_) total += b.step_counter;
  return total;
}

std::uint64_t TrainSession::step_seed(int branch_id, int cycle, int phase, int step) const {
  return SeedChain(cfg_.seed)
      .child("step")
      .child(static_cast<std::uint64_t>(branch_id))
      .child(static_cast<std::uint64_t>(cycle))
      .child(static_cast<std::uint64_t>(phase))
      .child(static_cast<std::uint64_t>(step))
      .value();
}

std::vector<std::vector<int>> TrainSession::draw_prompts(const Domain& domain, int count,
                                                         int branch_id, int cycle, int phase,
                                                         int step, const std::string& kind,
                                                         int kind_index) const {
  const SeedChain root = SeedChain(cfg_.seed)
                             .child("prompt")
                             .child(static_cast<std::uint64_t>(branch_id))
                             .child(static_cast<std::uint64_t>(cycle))
                             .child(static_cast<std::uint64_t>(phase))
                             .child(static_cast<std::uint64_t>(step))
                             .child(kind)
                             .child(static_cast<std::uint64_t>(kind_index));
  std::vector<std::vector<int>> prompts;
  prompts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    prompts.push_back(domain.generate(root.child(static_cast<std::uint64_t>(i)).value()).prompt);
  return prompts;
}

std::vector<std::vector<int>> TrainSession::maybe_pass_filter(
    const Domain& domain, const Policy& policy, std::vector<std::vector<int>> prompts,
    int branch_id, int cycle, int phase, int step) {
  if (!cfg_.grpo.pass_filter) return prompts;
  const std::uint64_t seed = SeedChain(cfg_.seed)
                                 .child("passfilter")
                                 .child(static_cast<std::uint64_t>(branch_id))
                                 .child(static_cast<std::uint64_t>(cycle))
                                 .child(static_cast<std::uint64_t>(phase))
                                 .child(static_cast<std::uint64_t>(step))
                                 .value();
  const std::vector<std::vector<int>> kept =
      pass_rate_filter(domain, policy, prompts, cfg_.grpo.pass_filter_samples,
                       cfg_.grpo.max_len, cfg_.grpo.temperature, seed);
  if (kept.empty()) {
    // Nothing informative in the batch; train on it anyway and say so.
    if (writer_)
      writer_->row({{"metric", "warning"},
                    {"what", "pass_filter_empty"},
                    {"step", global_step_ + 1},
                    {"branch", branch_id}});
    return prompts;
  }
  std::vector<std::vector<int>> filled;
  filled.reserve(prompts.size());
  for (size_t i = 0; i < prompts.size(); ++i) filled.push_back(kept[i % kept.size()]);
  return filled;
}

std::vector<std::pair<int, int>> TrainSession::pair_list() const {
  std::vector<int> ids;
  for (const BranchState& b : branches_) ids.push_back(b.id);
  if (cfg_.schedule.topology == Topology::kHubSpoke && ids.size() > 2)
    return hub_spoke_pairs(ids, cfg_.schedule.hub);
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < ids.size(); ++i) {
    for (size_t j = i + 1; j < ids.size(); ++j) pairs.emplace_back(ids[i], ids[j]);
  }
  return pairs;
}

void TrainSession::log_step_row(const BranchState& b, int cycle, const std::string& phase,
                                const StepStats& stats,
                                const std::map<std::string, double>& extra) {
  if (!writer_) return;
  nlohmann::json row = {{"metric", "train_step"}, {"step", global_step_},
                        {"cycle", cycle},         {"phase", phase},
                        {"branch", b.id},         {"abs_adv", stats.mean_abs_advantage},
                        {"clip_fraction", stats.clip_fraction},
                        {"tokens", stats.token_count},
                        {"degenerate", stats.any_degenerate_group}};
  if (stats.mean_reward) row["reward"] = *stats.mean_reward;
  if (stats.cross_mean_reward) row["cross_reward"] = *stats.cross_mean_reward;
  for (const auto& [k, v] : extra) row[k] = v;
  writer_->row(std::move(row));
}

void TrainSession::measure_pairs(int cycle, const std::string& phase) {
  if (!writer_) return;
  for (const auto& [a, b] : pair_list()) {
    const BranchState& ba = branches_[static_cast<size_t>(a)];
    const BranchState& bb = branches_[static_cast<size_t>(b)];
    // Probe states come from each side in turn; the headline value is the
    // mean of the two directions.
    auto probes_for = [&](const BranchState& side) {
      const SeedChain root = SeedChain(cfg_.seed)
                                 .child("probe")
                                 .child(static_cast<std::uint64_t>(a))
                                 .child(static_cast<std::uint64_t>(b))
                                 .child(static_cast<std::uint64_t>(global_step_))
                                 .child(static_cast<std::uint64_t>(side.id));
      std::vector<std::vector<int>> prompts;
      const Domain& dom = domain_of(side);
      for (int i = 0; i < cfg_.metrics.probe_prompts; ++i)
        prompts.push_back(
            dom.generate(root.child("prompts").child(static_cast<std::uint64_t>(i)).value())
                .prompt);
      return collect_probe_states(side.policy, prompts, cfg_.metrics.probe_rollouts,
                                  root.child("states").value(), cfg_.grpo.max_len,
                                  "branch" + std::to_string(side.id));
    };
    const ProbeSet pa = probes_for(ba);
    const ProbeSet pb = probes_for(bb);
    const OverlapReport ra = top_k_overlap(ba.policy, bb.policy, pa, cfg_.metrics.k);
    const OverlapReport rb = top_k_overlap(bb.policy, ba.policy, pb, cfg_.metrics.k);
    writer_->row({{"metric", "pair_distance"},
                  {"step", global_step_},
                  {"cycle", cycle},
                  {"phase", phase},
                  {"branch_pair", pair_label(a, b)},
                  {"k", cfg_.metrics.k},
                  {"mean_overlap", 0.5 * (ra.mean_overlap + rb.mean_overlap)},
                  {"sym_kl", 0.5 * (ra.sym_kl_mean + rb.sym_kl_mean)},
                  {"overlap_from_a", ra.mean_overlap},
                  {"overlap_from_b", rb.mean_overlap},
                  {"sym_kl_from_a", ra.sym_kl_mean},
                  {"sym_kl_from_b", rb.sym_kl_mean}});
  }
}

void TrainSession::run_synchronized(int cycle, int phase, int steps, bool cross_enabled,
                                    const std::string& label) {
  if (writer_)
    writer_->row({{"metric", "phase"},
                  {"step", global_step_},
                  {"cycle", cycle},
                  {"phase", label},
                  {"steps", steps}});
  const GrpoParams params = grpo_params_of(cfg_);
  const Policy* kl_ref = cfg_.grpo.kl_coeff > 0.0 ? &theta0_ : nullptr;
  const auto pairs = pair_list();

  for (int s = 0; s < steps; ++s) {
    const int step_no = static_cast<int>(global_step_) + 1;

    // Teacher snapshots are taken once, before anyone moves.
    std::vector<TeacherSnapshot> snaps;
    if (cross_enabled) {
      snaps.reserve(branches_.size());
      for (const BranchState& b : branches_)
        snaps.push_back({b.policy, "branch" + std::to_string(b.id), b.step_counter});
    }

    struct Plan {
      std::vector<std::vector<int>> native;
      std::vector<TeacherFeed> feeds;
      std::uint64_t seed = 0;
    };
    std::vector<Plan> plans(branches_.size());
    for (size_t bi = 0; bi < branches_.size(); ++bi) {
      BranchState& b = branches_[bi];
      Plan& plan = plans[bi];
      const Domain& dom = domain_of(b);
      plan.native = maybe_pass_filter(
          dom, b.policy,
          draw_prompts(dom, cfg_.grpo.batch, b.id, cycle, phase, step_no, "native", 0), b.id,
          cycle, phase, step_no);
      if (cross_enabled && b.beta > 0.0) {
        for (const auto& [x, y] : pairs) {
          const int partner = (x == b.id) ? y : (y == b.id ? x : -1);
          if (partner < 0) continue;
          TeacherFeed feed;
          feed.snapshot = &snaps[static_cast<size_t>(partner)];
          feed.domain = &domain_of(branches_[static_cast<size_t>(partner)]);
          feed.prompts = draw_prompts(*feed.domain, cfg_.grpo.batch, b.id, cycle, phase,
                                      step_no, "cross", partner);
          plan.feeds.push_back(std::move(feed));
        }
      }
      plan.seed = step_seed(b.id, cycle, phase, step_no);
    }

    // Branch updates are independent given the snapshots, so they can run
    // on any number of workers; the sequential commit below keeps output
    // order (and therefore bytes) fixed.
    auto compute = [&](size_t bi) {
      const Plan& plan = plans[bi];
      return mixed_phase_step(branches_[bi], domain_of(branches_[bi]), plan.native,
                              plan.feeds, params, cfg_.opd_loss_form, kl_ref, plan.seed);
    };
    std::vector<std::pair<BranchState, StepStats>> results;
    results.reserve(branches_.size());
    if (workers_ > 1 && branches_.size() > 1) {
      std::vector<std::future<std::pair<BranchState, StepStats>>> futs;
      for (size_t bi = 0; bi < branches_.size(); ++bi)
        futs.push_back(std::async(std::launch::async, compute, bi));
      for (auto& f : futs) results.push_back(f.get());
    } else {
      for (size_t bi = 0; bi < branches_.size(); ++bi) results.push_back(compute(bi));
    }

    global_step_ = step_no;
    for (size_t bi = 0; bi < branches_.size(); ++bi) {
      branches_[bi] = std::move(results[bi].first);
      log_step_row(branches_[bi], cycle, label, results[bi].second, {});
    }
    if (global_step_ % cfg_.metrics.every == 0) measure_pairs(cycle, label);
  }
}

void TrainSession::run_rlvr_phase(int cycle) {
  run_synchronized(cycle, kPhaseRl, cfg_.schedule.rlvr_steps, false, "I");
}

void TrainSession::run_mutual_opd_phase(int cycle, bool cross_enabled) {
  run_synchronized(cycle, kPhaseOpd, cfg_.schedule.opd_steps, cross_enabled, "II");
}

void TrainSession::run_union_step(int cycle) {
  const int step_no = static_cast<int>(global_step_) + 1;
  const GrpoParams params = grpo_params_of(cfg_);
  const Policy* kl_ref = cfg_.grpo.kl_coeff > 0.0 ? &theta0_ : nullptr;
  BranchState& b0 = branches_.front();

  // Round-robin the batch slots over the branch domains, then pool all
  // rollouts into one union batch: a single GRPO update, normalized over
  // everything it saw.
  const int n = static_cast<int>(branches_.size());
  std::vector<detail::NativeBatch> batches;
  std::vector<int> counts(static_cast<size_t>(n), 0);
  for (int slot = 0; slot < cfg_.grpo.batch; ++slot) ++counts[static_cast<size_t>(slot % n)];
  double reward_sum = 0.0;
  long rollouts = 0;
  std::map<std::string, double> by_domain;
  for (int di = 0; di < n; ++di) {
    if (counts[static_cast<size_t>(di)] == 0) continue;
    const Domain& dom = domain_of(branches_[static_cast<size_t>(di)]);
    const auto prompts = draw_prompts(dom, counts[static_cast<size_t>(di)], b0.id, cycle,
                                      kPhaseMix, step_no, "native", di);
    const std::uint64_t seed = SeedChain(step_seed(b0.id, cycle, kPhaseMix, step_no))
                                   .child("dom")
                                   .child(static_cast<std::uint64_t>(di))
                                   .value();
    detail::NativeBatch nb = detail::sample_native_groups(b0.policy, dom, prompts, params, seed);
    reward_sum += nb.reward_sum;
    rollouts += nb.rollout_count;
    by_domain["reward_" + dom.id()] =
        nb.reward_sum / static_cast<double>(std::max<long>(1, nb.rollout_count));
    batches.push_back(std::move(nb));
  }

  std::vector<std::vector<double>> token_adv;
  std::vector<detail::RolloutJob> jobs;
  bool degenerate = false;
  for (const auto& nb : batches) {
    degenerate = degenerate || nb.any_degenerate;
    for (size_t i = 0; i < nb.groups.size(); ++i) {
      for (size_t g = 0; g < nb.groups[i].size(); ++g) {
        token_adv.emplace_back(nb.groups[i][g].completion.size(), nb.advantages[i][g]);
        jobs.push_back({&nb.groups[i][g], token_adv.back()});
      }
    }
  }
  std::vector<double> acc(b0.policy.params.size(), 0.0);
  detail::SurrogateTotals totals;
  detail::accumulate_clipped_surrogate(b0.policy, jobs, params.bounds, params.kl_coeff, kl_ref,
                                       acc, totals);
  b0.policy = apply_update(b0.policy, acc, params.learning_rate);
  b0.step_counter += 1;
  global_step_ = step_no;

  StepStats stats;
  stats.mean_reward = reward_sum / static_cast<double>(std::max<long>(1, rollouts));
  stats.mean_abs_advantage =
      totals.token_terms ? totals.abs_advantage_sum / static_cast<double>(totals.token_terms)
                         : 0.0;
  stats.clip_fraction = totals.token_terms
                            ? static_cast<double>(totals.clipped_terms) /
                                  static_cast<double>(totals.token_terms)
                            : 0.0;
  stats.token_count = totals.token_terms;
  stats.any_degenerate_group = degenerate;
  log_step_row(b0, cycle, "mix", stats, by_domain);
}

void TrainSession::run_distill_step(BranchState& student, std::span<const int> teacher_ids,
                                    int cycle) {
  if (teacher_ids.empty()) throw ConfigError("distill step needs at least one teacher");
  const int step_no = static_cast<int>(global_step_) + 1;
  const GrpoParams params = grpo_params_of(cfg_);

  std::vector<TeacherSnapshot> snaps;
  std::vector<TeacherFeed> feeds;
  snaps.reserve(teacher_ids.size());
  for (int t : teacher_ids) {
    const BranchState& teacher = branches_.at(static_cast<size_t>(t));
    snaps.push_back({teacher.policy, "branch" + std::to_string(t), teacher.step_counter});
  }
  for (size_t i = 0; i < teacher_ids.size(); ++i) {
    const BranchState& teacher = branches_.at(static_cast<size_t>(teacher_ids[i]));
    TeacherFeed feed;
    feed.snapshot = &snaps[i];
    feed.domain = &domain_of(teacher);
    feed.prompts = draw_prompts(*feed.domain, cfg_.grpo.batch, student.id, cycle,
                                kPhaseDistill, step_no, "cross", teacher_ids[i]);
    feeds.push_back(std::move(feed));
  }

  auto [next, stats] =
      mixed_phase_step(student, *feeds.front().domain, {}, feeds, params, cfg_.opd_loss_form,
                       nullptr, step_seed(student.id, cycle, kPhaseDistill, step_no));
  student = std::move(next);
  global_step_ = step_no;
  log_step_row(student, cycle, "distill", stats, {});

  if (writer_ && global_step_ % cfg_.metrics.every == 0) {
    // Distance of the student to each frozen teacher, probed from the
    // student's own visitation on the teacher's prompts.
    for (size_t i = 0; i < teacher_ids.size(); ++i) {
      const int t = teacher_ids[i];
      const SeedChain root = SeedChain(cfg_.seed)
                                 .child("probe")
                                 .child(static_cast<std::uint64_t>(student.id))
                                 .child(static_cast<std::uint64_t>(t))
                                 .child(static_cast<std::uint64_t>(global_step_))
                                 .child(static_cast<std::uint64_t>(student.id));
      std::vector<std::vector<int>> prompts;
      for (int p = 0; p < cfg_.metrics.probe_prompts; ++p)
        prompts.push_back(feeds[i].domain
                              ->generate(root.child("prompts")
                                             .child(static_cast<std::uint64_t>(p))
                                             .value())
                              .prompt);
      const ProbeSet probes = collect_probe_states(
          student.policy, prompts, cfg_.metrics.probe_rollouts, root.child("states").value(),
          cfg_.grpo.max_len, "student");
      const OverlapReport rep =
          top_k_overlap(student.policy, snaps[i].policy, probes, cfg_.metrics.k);
      writer_->row({{"metric", "pair_distance"},
                    {"step", global_step_},
                    {"cycle", cycle},
                    {"phase", "distill"},
                    {"branch_pair", pair_label(student.id, t)},
                    {"k", cfg_.metrics.k},
                    {"mean_overlap", rep.mean_overlap},
                    {"sym_kl", rep.sym_kl_mean},
                    {"overlap_from_a", rep.mean_overlap},
                    {"overlap_from_b", rep.mean_overlap},
                    {"sym_kl_from_a", rep.sym_kl_mean},
                    {"sym_kl_from_b", rep.sym_kl_mean}});
    }
  }
}

namespace {

void save_cycle_checkpoints(const RunConfig& cfg, const std::vector<BranchState>& branches,
                            int cycle) {
  for (const BranchState& b : branches) {
    const std::filesystem::path path = std::filesystem::path(cfg.out_dir) /
                                       ("branch" + std::to_string(b.id)) /
                                       ("cycle" + std::to_string(cycle) + ".ckpt");
    save_checkpoint(b.policy, path);
  }
}

std::vector<std::string> distinct_domains(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (const BranchConfig& b : cfg.branches) {
    if (std::find(out.begin(), out.end(), b.domain) == out.end()) out.push_back(b.domain);
  }
  return out;
}

}  // namespace

TrainResult run_training(const RunConfig& cfg, MetricsWriter& writer, int workers) {
  validate(cfg);
  const int n = static_cast<int>(cfg.branches.size());
  const ScheduleConfig& sched = cfg.schedule;
  if (sched.mode == Mode::kStaticOpd) {
    if (n != 2) throw ConfigError("static-opd expects exactly two branches");
    if (cfg.branches[static_cast<size_t>(sched.direction_student)].beta <= 0.0)
      throw ConfigError("static-opd student branch needs beta > 0");
  }

  TrainSession sess(cfg, &writer, workers);
  TrainResult result{Policy::zeros(task_vocab(), cfg.window), {}, 0, {}};
  long expected_updates = 0;

  switch (sched.mode) {
    case Mode::kCoevolve:
    case Mode::kExpert: {
      const bool cross = sched.mode == Mode::kCoevolve;
      for (int c = 1; c <= sched.cycles; ++c) {
        sess.run_rlvr_phase(c);
        sess.run_mutual_opd_phase(c, cross);
        save_cycle_checkpoints(cfg, sess.branches(), c);
      }
      std::vector<Policy> policies;
      for (const BranchState& b : sess.branches()) policies.push_back(b.policy);
      MergeSpec spec;
      spec.weights = cfg.merge_weights.empty()
                         ? std::vector<double>(policies.size(), 1.0 / policies.size())
                         : cfg.merge_weights;
      result.final_model = merge(policies, spec);
      expected_updates = static_cast<long>(n) * sched.cycles *
                         (sched.rlvr_steps + sched.opd_steps);
      break;
    }
    case Mode::kMixedRlvr: {
      // Same per-cycle rhythm, n*cycles cycles total: the union policy gets
      // the summed budget of the branch experts it replaces.
      const int total_cycles = n * sched.cycles;
      const int per_cycle = sched.rlvr_steps + sched.opd_steps;
      for (int c = 1; c <= total_cycles; ++c) {
        for (int s = 0; s < per_cycle; ++s) sess.run_union_step(c);
        save_cycle_checkpoints(cfg, {sess.branches().begin(), sess.branches().begin() + 1}, c);
      }
      result.final_model = sess.branches().front().policy;
      expected_updates = static_cast<long>(total_cycles) * per_cycle;
      break;
    }
    case Mode::kStaticOpd: {
      for (int c = 1; c <= sched.cycles; ++c) {
        sess.run_rlvr_phase(c);
        sess.run_mutual_opd_phase(c, false);
        save_cycle_checkpoints(cfg, sess.branches(), c);
      }
      const int teacher = sched.direction_teacher;
      const int student = sched.direction_student;
      const int distill_steps = sched.cycles * sched.opd_steps;
      writer.row({{"metric", "phase"},
                  {"step", sess.global_step()},
                  {"cycle", 0},
                  {"phase", "distill"},
                  {"steps", distill_steps}});
      const int teachers[1] = {teacher};
      for (int s = 0; s < distill_steps; ++s)
        sess.run_distill_step(sess.branches()[static_cast<size_t>(student)], teachers, 0);
      result.final_model = sess.branches()[static_cast<size_t>(student)].policy;
      expected_updates =
          static_cast<long>(n) * sched.cycles * (sched.rlvr_steps + sched.opd_steps) +
          distill_steps;
      break;
    }
    case Mode::kMopd: {
      for (int c = 1; c <= sched.cycles; ++c) {
        sess.run_rlvr_phase(c);
        sess.run_mutual_opd_phase(c, false);
        save_cycle_checkpoints(cfg, sess.branches(), c);
      }
      BranchState student;
      student.id = n;
      student.policy = sess.initial_policy();
      student.domain_id = cfg.branches.front().domain;
      student.beta = 1.0;
      std::vector<int> teacher_ids;
      for (int t = 0; t < n; ++t) teacher_ids.push_back(t);
      const int distill_steps = sched.cycles * sched.opd_steps;
      writer.row({{"metric", "phase"},
                  {"step", sess.global_step()},
                  {"cycle", 0},
                  {"phase", "distill"},
                  {"steps", distill_steps}});
      for (int s = 0; s < distill_steps; ++s) sess.run_distill_step(student, teacher_ids, 0);
      result.final_model = student.policy;
      sess.branches().push_back(std::move(student));
      expected_updates =
          static_cast<long>(n) * sched.cycles * (sched.rlvr_steps + sched.opd_steps) +
          distill_steps;
      break;
    }
  }

  result.branches = sess.branches();
  result.total_updates = 0;
  for (const BranchState& b : result.branches) result.total_updates += b.step_counter;
  writer.row({{"metric", "total_updates"}, {"value", result.total_updates}});
  if (result.total_updates != expected_updates)
    throw std::logic_error("update budget mismatch: applied " +
                           std::to_string(result.total_updates) + ", expected " +
                           std::to_string(expected_updates));

  save_checkpoint(result.final_model, std::filesystem::path(cfg.out_dir) / "merged.ckpt");

  // Final table: the consolidated model and every branch, on every domain
  // that appears in the config.
  const std::vector<std::string> domains = distinct_domains(cfg);
  auto eval_model = [&](const std::string& name, const Policy& p) {
    for (const std::string& d : domains) {
      const Domain dom = make_domain(d);
      const double acc = eval_accuracy(p, dom, 0, cfg.seed, cfg.grpo.max_len);
      result.final_evals.push_back({name, d, acc});
      writer.row({{"metric", "final_eval"}, {"model", name}, {"domain", d}, {"value", acc}});
    }
  };
  eval_model("merged", result.final_model);
  if (sched.mode == Mode::kMixedRlvr) {
    eval_model("branch0", result.branches.front().policy);
  } else {
    for (const BranchState& b : result.branches)
      eval_model("branch" + std::to_string(b.id), b.policy);
  }
  return result;
}

}  // namespace copd

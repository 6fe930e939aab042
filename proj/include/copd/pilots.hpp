#pragma once

#include <optional>
#include <vector>

#include "copd/config.hpp"
#include "copd/metrics_log.hpp"
#include "copd/policy.hpp"

namespace copd {

struct OverlapGainRow {
  int variant = 0;
  double temperature = 1.0;
  bool control = false;  // teacher playing student: expected gain ~ 0
  double overlap = 0.0;  // pre-distillation top-k overlap with the teacher
  double pre = 0.0;
  double post = 0.0;
  double gain = 0.0;
  double se = 0.0;  // standard error of the gain from the two evals
};

struct OverlapGainResult {
  std::vector<OverlapGainRow> rows;
  double spearman = 0.0;       // over non-control variants: overlap vs gain
  bool reduced_confidence = false;  // fewer than 3 distinct overlap levels
};

// Does pre-distillation behavioral overlap with the teacher predict how
// much a student gains from a fixed distillation budget? Students are
// short RLVR runs from zero params at the configured temperatures, plus a
// copy of the teacher as a no-op control. The teacher is trained here
// unless one is supplied.
OverlapGainResult pilot_overlap_gain(const RunConfig& cfg, MetricsWriter& writer,
                                     const std::optional<Policy>& teacher);

struct DriftPoint {
  int branch = 0;
  long step = 0;
  double overlap = 0.0;  // top-k overlap against theta_0
  double sym_kl = 0.0;
};

// How fast do branches drift away from their shared initialization under
// domain-specific RLVR alone? Measures every cfg.pilot.interval steps,
// starting at step 0, on each branch's own probe states.
std::vector<DriftPoint> pilot_drift(const RunConfig& cfg, MetricsWriter& writer);

}  // namespace copd

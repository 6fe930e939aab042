#pragma once

#include <string>

#include "copd/policy.hpp"

namespace copd {

// One policy branch: its parameters, the domain it trains on, and the
// weight it gives to cross-branch distillation signal.
struct BranchState {
  int id = 0;
  Policy policy;
  std::string domain_id;
  double beta = 1.0;
  long step_counter = 0;  // parameter updates applied so far
};

}  // namespace copd

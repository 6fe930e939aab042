#pragma once

#include <filesystem>

#include "copd/policy.hpp"

namespace copd {

// Checkpoint format: one ASCII header line
//   COPD1 <vocab_size> <window> <param_count>\n
// followed by param_count raw little-endian float64 values in row-major
// params order. Round-trips bit-exactly.
void save_checkpoint(const Policy& policy, const std::filesystem::path& path);

// The header does not carry BOS/EOS ids; the caller supplies the vocab and
// its size is checked against the header.
Policy load_checkpoint(const std::filesystem::path& path, const Vocab& vocab);

}  // namespace copd

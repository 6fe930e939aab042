#pragma once

#include "copd/errors.hpp"

namespace copd {

// Token id space shared by a policy and the tasks it is trained on.
// Ids are dense in [0, size); BOS is only ever consumed as left padding,
// EOS terminates completions.
struct Vocab {
  int size = 0;
  int bos = -1;
  int eos = -1;

  bool contains(int token) const { return token >= 0 && token < size; }

  void validate() const {
    if (size < 2) throw ConfigError("vocab size must be at least 2");
    if (!contains(bos)) throw ConfigError("vocab bos id out of range");
    if (!contains(eos)) throw ConfigError("vocab eos id out of range");
    if (bos == eos) throw ConfigError("vocab bos and eos must differ");
  }

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

}  // namespace copd

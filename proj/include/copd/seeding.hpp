#pragma once

#include <cstdint>
#include <string_view>

namespace copd {

// splitmix64 finalizer. Used both as a stream generator step and as the
// avalanche stage of the seed chain below.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic seed derivation. Every random draw in a run gets its seed
// from the run seed plus a path of tags (branch id, cycle, phase, step,
// slot, ...), so results do not depend on scheduling or worker count and
// are reproducible across platforms. std::hash is deliberately avoided:
// it is implementation-defined.
class SeedChain {
 public:
  SeedChain() = default;
  explicit SeedChain(std::uint64_t root) : h_(splitmix64(root ^ kSalt)) {}

  SeedChain child(std::uint64_t v) const {
    SeedChain c;
    c.h_ = splitmix64(h_ ^ (v + 0x9e3779b97f4a7c15ull));
    return c;
  }

  SeedChain child(std::string_view tag) const {
    // FNV-1a over the tag bytes, then avalanche against the current state.
    std::uint64_t f = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
      f ^= c;
      f *= 0x100000001b3ull;
    }
    SeedChain c;
    c.h_ = splitmix64(h_ ^ f);
    return c;
  }

  std::uint64_t value() const { return h_; }

 private:
  static constexpr std::uint64_t kSalt = 0xc0bd5eedull;
  std::uint64_t h_ = 0;
};

}  // namespace copd

#include "copd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "copd/errors.hpp"

namespace copd {

namespace {

constexpr char kMagic[] = "COPD1";

void put_le64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_le64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const Policy& policy, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  out << kMagic << ' ' << policy.vocab.size << ' ' << policy.window << ' '
      << policy.params.size() << '\n';
  for (double d : policy.params) put_le64(out, std::bit_cast<std::uint64_t>(d));
  out.flush();
  if (!out) throw NumericError("checkpoint write failed: " + path.string());
}

Policy load_checkpoint(const std::filesystem::path& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("checkpoint missing header: " + path.string());
  std::istringstream hs(header);
  std::string magic;
  long long vocab_size = 0, window = 0, count = 0;
  hs >> magic >> vocab_size >> window >> count;
  if (!hs || magic != kMagic)
    throw ConfigError("bad checkpoint header in " + path.string());
  if (vocab_size != vocab.size)
    throw ConfigError("checkpoint vocab size " + std::to_string(vocab_size) +
                      " does not match expected " + std::to_string(vocab.size));
  if (window < 1 || count != vocab_size * window * vocab_size)
    throw ConfigError("checkpoint header is inconsistent in " + path.string());
  Policy p = Policy::zeros(vocab, static_cast<int>(window));
  for (long long i = 0; i < count; ++i) {
    const std::uint64_t bits = get_le64(in);
    if (!in) throw ConfigError("checkpoint truncated: " + path.string());
    p.params[static_cast<size_t>(i)] = std::bit_cast<double>(bits);
  }
  return p;
}

}  // namespace copd

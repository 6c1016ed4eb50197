#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mlv {

/// A deterministic random stream. Streams are derived from a root seed and a
/// path of integer ids (replication, subject, ...), so the same path always
/// yields the same draws regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root, std::initializer_list<std::uint64_t> path = {})
      : RngStream(root, std::vector<std::uint64_t>(path)) {}

  RngStream(std::uint64_t root, const std::vector<std::uint64_t>& path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * path.size() + 2);
    auto push = [&words](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(root);
    for (auto id : path) push(id);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  RngStream child(std::uint64_t id) { return RngStream(engine_(), {id}); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mlv

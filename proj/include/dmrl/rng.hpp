#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dmrl {

// splitmix64 finalizer; full-avalanche 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based splittable stream. A stream is identified by a 64-bit key
// derived from (global seed, labels...); draws are mix64 of key + counter,
// so any stream can be re-created and replayed independently of every other
// stream. Bit-identical across platforms.
class RngStream {
 public:
  RngStream() : key_(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream keyed(std::uint64_t seed, std::string_view label_a,
                         std::string_view label_b = {}) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ fnv1a64(label_a));
    if (!label_b.empty()) h = mix64(h ^ fnv1a64(label_b));
    return RngStream(h);
  }

  // Derived stream, independent of this one and of any other split index.
  RngStream split(std::uint64_t index) const {
    return RngStream(mix64(key_ ^ mix64(index ^ 0xa5a5a5a5a5a5a5a5ULL)));
  }

  std::uint64_t next_u64() { return mix64(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64, and
    // reproducibility matters more than the ~n/2^64 modulo bias.
    return next_u64() % n;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dmrl

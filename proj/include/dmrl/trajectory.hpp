#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"

namespace dmrl {

// Finite autoregressive trajectory space: tokens 0..V-1 plus a distinguished
// STOP symbol. A complete trajectory is either a token sequence of length
// < max_len followed by STOP, or a token sequence of exactly max_len tokens
// (implicitly terminated). The empty trajectory (immediate STOP) is valid.
struct TrajectorySpace {
  int alphabet_size = 1;  // V >= 1
  int max_len = 1;        // T >= 1
  std::uint64_t enumeration_cap = 2'000'000;

  void validate() const {
    if (alphabet_size < 1) throw ConfigError("alphabet_size must be >= 1");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
  }
};

// A complete trajectory: the token sequence. STOP-termination is implied by
// tokens.size() < space.max_len.
struct Trajectory {
  std::vector<int> tokens;

  bool operator==(const Trajectory& o) const { return tokens == o.tokens; }
  int length() const { return static_cast<int>(tokens.size()); }
};

inline bool stop_terminated(const TrajectorySpace& space, const Trajectory& o) {
  return o.length() < space.max_len;
}

inline bool trajectory_valid(const TrajectorySpace& space, const Trajectory& o) {
  if (o.length() > space.max_len) return false;
  for (int t : o.tokens)
    if (t < 0 || t >= space.alphabet_size) return false;
  return true;
}

// Closed-form trajectory count: sum_{l=0}^{T-1} V^l (STOP-terminated) + V^T.
// Throws if the count exceeds the cap (never truncates).
inline std::uint64_t trajectory_count(const TrajectorySpace& space) {
  space.validate();
  const std::uint64_t v = static_cast<std::uint64_t>(space.alphabet_size);
  std::uint64_t count = 0;
  std::uint64_t pw = 1;
  for (int l = 0; l < space.max_len; ++l) {
    count += pw;
    if (pw > space.enumeration_cap / (v == 0 ? 1 : v) + 1) {
      throw EnumerationCapExceeded("trajectory count exceeds enumeration cap");
    }
    pw *= v;
  }
  count += pw;  // full-length trajectories
  if (count > space.enumeration_cap) {
    throw EnumerationCapExceeded("trajectory count " + std::to_string(count) +
                                 " exceeds enumeration cap " +
                                 std::to_string(space.enumeration_cap));
  }
  return count;
}

// Lexicographic enumeration with STOP ordered before every token: at each
// prefix the STOP-terminated trajectory is emitted first, then the subtrees
// of tokens 0..V-1 in order.
inline std::vector<Trajectory> enumerate_trajectories(const TrajectorySpace& space) {
  const std::uint64_t n = trajectory_count(space);  // also validates the cap
  std::vector<Trajectory> out;
  out.reserve(n);
  std::vector<int> prefix;
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(prefix.size()) == space.max_len) {
      out.push_back(Trajectory{prefix});
      return;
    }
    out.push_back(Trajectory{prefix});  // STOP here
    for (int t = 0; t < space.alphabet_size; ++t) {
      prefix.push_back(t);
      self(self);
      prefix.pop_back();
    }
  };
  rec(rec);
  return out;
}

// Serialization: hyphen-joined token indices with a trailing "S" marker for
// STOP-terminated trajectories, e.g. "0-2-1-S"; the empty trajectory is "S".
inline std::string encode_trajectory(const TrajectorySpace& space, const Trajectory& o) {
  std::string s;
  for (std::size_t i = 0; i < o.tokens.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(o.tokens[i]);
  }
  if (stop_terminated(space, o)) {
    if (!s.empty()) s += '-';
    s += 'S';
  }
  return s;
}

inline Trajectory decode_trajectory(const TrajectorySpace& space, const std::string& text) {
  Trajectory o;
  std::size_t i = 0;
  bool saw_stop = false;
  while (i < text.size()) {
    if (text[i] == 'S') {
      saw_stop = true;
      ++i;
      break;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != '-') ++j;
    try {
      o.tokens.push_back(std::stoi(text.substr(i, j - i)));
    } catch (const std::exception&) {
      throw ConfigError("malformed trajectory string: " + text);
    }
    i = (j < text.size()) ? j + 1 : j;
  }
  if (i != text.size()) throw ConfigError("malformed trajectory string: " + text);
  if (saw_stop != stop_terminated(space, o) || !trajectory_valid(space, o)) {
    throw ConfigError("trajectory '" + text + "' is not a complete trajectory of this space");
  }
  return o;
}

}  // namespace dmrl

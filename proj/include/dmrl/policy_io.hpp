#pragma once

#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dmrl/amortizer.hpp"  // hexfloat helper
#include "dmrl/errors.hpp"
#include "dmrl/policy.hpp"

namespace dmrl {

// Flat-table policy checkpoint: one line per (prefix, symbol) logit, in
// prefix-index then symbol order, preceded by a header with the space
// dimensions and the run seed. Prefix "_" is the empty prefix; symbol "S"
// is STOP. Hexfloat logits round-trip bit-exactly.
inline std::string serialize_policy(const TabularPolicy& policy, std::uint64_t seed) {
  const TrajectorySpace& space = policy.space();
  std::ostringstream os;
  os << "# dmrl-policy v1\n";
  os << "# columns: prefix symbol logit\n";
  os << "alphabet_size " << space.alphabet_size << "\n";
  os << "max_len " << space.max_len << "\n";
  os << "seed " << seed << "\n";
  const int w = policy.row_width();
  std::size_t row = 0;
  std::vector<int> prefix;
  for (int len = 0; len < space.max_len; ++len) {
    prefix.assign(len, 0);
    while (true) {
      std::string ps = "_";
      if (len > 0) {
        ps.clear();
        for (int i = 0; i < len; ++i) {
          if (i) ps += '-';
          ps += std::to_string(prefix[i]);
        }
      }
      for (int c = 0; c < w; ++c) {
        os << ps << ' ' << (c == 0 ? std::string("S") : std::to_string(c - 1)) << ' '
           << Amortizer::hexfloat(policy.logits()[row * w + c]) << "\n";
      }
      ++row;
      // next prefix of this length, base-V increment
      int i = len - 1;
      while (i >= 0 && ++prefix[i] == space.alphabet_size) prefix[i--] = 0;
      if (i < 0) break;
    }
  }
  return os.str();
}

inline TabularPolicy deserialize_policy(std::istream& in, std::uint64_t* seed_out = nullptr) {
  std::string line;
  if (!std::getline(in, line) || line != "# dmrl-policy v1") {
    throw ConfigError("policy checkpoint: bad header");
  }
  std::getline(in, line);  // columns comment
  TrajectorySpace space;
  std::uint64_t seed = 0;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, line)) throw ConfigError("policy checkpoint: truncated header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "alphabet_size") ls >> space.alphabet_size;
    else if (key == "max_len") ls >> space.max_len;
    else if (key == "seed") ls >> seed;
    else throw ConfigError("policy checkpoint: unexpected header line '" + line + "'");
  }
  if (seed_out) *seed_out = seed;
  TabularPolicy policy = TabularPolicy::uniform(space);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string prefix_s, symbol_s, logit_s;
    ls >> prefix_s >> symbol_s >> logit_s;
    std::vector<int> prefix;
    if (prefix_s != "_") {
      std::istringstream ps(prefix_s);
      std::string tok;
      while (std::getline(ps, tok, '-')) prefix.push_back(std::stoi(tok));
    }
    const int col = symbol_s == "S" ? 0 : std::stoi(symbol_s) + 1;
    const std::size_t row = policy.prefix_row(prefix, prefix.size());
    policy.logits()[row * policy.row_width() + col] = std::strtod(logit_s.c_str(), nullptr);
    ++count;
  }
  if (count != policy.logits().size()) {
    throw ConfigError("policy checkpoint: wrong number of table lines");
  }
  return policy;
}

}  // namespace dmrl

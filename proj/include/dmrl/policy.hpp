#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/rng.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

inline constexpr double kLogitClamp = 40.0;  // pre-softmax clamp, +/-

// Full-prefix autoregressive softmax policy. One logit row per prefix of
// length < max_len; row columns are [STOP, token 0, ..., token V-1]. The
// parameterization spans every full-support distribution over the space.
class TabularPolicy {
 public:
  TabularPolicy() = default;

  static TabularPolicy uniform(const TrajectorySpace& space) {
    TabularPolicy p(space);
    return p;
  }

  // Logits i.i.d. uniform in [-scale, scale].
  static TabularPolicy random(const TrajectorySpace& space, RngStream stream,
                              double scale = 1.0) {
    TabularPolicy p(space);
    for (double& z : p.logits_) z = (2.0 * stream.next_double() - 1.0) * scale;
    return p;
  }

  const TrajectorySpace& space() const { return space_; }
  int row_width() const { return space_.alphabet_size + 1; }
  std::size_t num_rows() const { return logits_.size() / row_width(); }
  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }

  // Row index of a prefix (length < max_len): offset(l) + base-V value.
  std::size_t prefix_row(const std::vector<int>& prefix, std::size_t len) const {
    std::size_t idx = 0, pw = 1;
    const std::size_t v = static_cast<std::size_t>(space_.alphabet_size);
    for (std::size_t l = 0; l < len; ++l) {
      idx += pw;
      pw *= v;
    }
    std::size_t val = 0;
    for (std::size_t l = 0; l < len; ++l) val = val * v + static_cast<std::size_t>(prefix[l]);
    return idx + val;
  }

  // Log-softmax of one row, with the documented clamp to [-40, 40] applied
  // before normalization. out has row_width() entries.
  void row_log_softmax(std::size_t row, std::vector<double>& out) const {
    const int w = row_width();
    out.resize(w);
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < w; ++c) {
      out[c] = std::clamp(logits_[row * w + c], -kLogitClamp, kLogitClamp);
      mx = std::max(mx, out[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < w; ++c) sum += std::exp(out[c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < w; ++c) out[c] -= lse;
  }

  double log_prob(const Trajectory& o) const {
    if (!trajectory_valid(space_, o)) throw ContractError("log_prob: trajectory not in space");
    std::vector<double> row;
    double lp = 0.0;
    for (int t = 0; t < o.length(); ++t) {
      row_log_softmax(prefix_row(o.tokens, static_cast<std::size_t>(t)), row);
      lp += row[o.tokens[t] + 1];
    }
    if (stop_terminated(space_, o)) {
      row_log_softmax(prefix_row(o.tokens, o.tokens.size()), row);
      lp += row[0];
    }
    return lp;
  }

  // Ancestral sampling; byte-identical for a fixed stream state.
  Trajectory sample(RngStream& stream) const {
    Trajectory o;
    std::vector<double> row;
    while (o.length() < space_.max_len) {
      row_log_softmax(prefix_row(o.tokens, o.tokens.size()), row);
      const double u = stream.next_double();
      double acc = 0.0;
      int chosen = row_width() - 1;  // guard against rounding at the top end
      for (int c = 0; c < row_width(); ++c) {
        acc += std::exp(row[c]);
        if (u < acc) {
          chosen = c;
          break;
        }
      }
      if (chosen == 0) return o;  // STOP
      o.tokens.push_back(chosen - 1);
    }
    return o;
  }

  std::vector<Trajectory> sample_n(RngStream& stream, std::size_t n) const {
    std::vector<Trajectory> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(stream));
    return out;
  }

  // Analytic grad of log pi(o): one-hot(chosen) - softmax(row) on each
  // visited prefix row, zero elsewhere. Same layout as logits().
  std::vector<double> score_gradient(const Trajectory& o) const {
    if (!trajectory_valid(space_, o)) throw ContractError("score_gradient: trajectory not in space");
    std::vector<double> grad(logits_.size(), 0.0);
    std::vector<double> row;
    const int w = row_width();
    auto add_row = [&](std::size_t r, int chosen) {
      row_log_softmax(r, row);
      for (int c = 0; c < w; ++c) grad[r * w + c] -= std::exp(row[c]);
      grad[r * w + chosen] += 1.0;
    };
    for (int t = 0; t < o.length(); ++t) {
      add_row(prefix_row(o.tokens, static_cast<std::size_t>(t)), o.tokens[t] + 1);
    }
    if (stop_terminated(space_, o)) add_row(prefix_row(o.tokens, o.tokens.size()), 0);
    return grad;
  }

  // Probability table aligned with enumerate_trajectories order.
  std::vector<double> trajectory_log_probs() const {
    std::vector<double> out;
    out.reserve(trajectory_count(space_));
    std::vector<int> prefix;
    std::vector<double> row;
    auto rec = [&](auto&& self, double lp) -> void {
      if (static_cast<int>(prefix.size()) == space_.max_len) {
        out.push_back(lp);
        return;
      }
      row_log_softmax(prefix_row(prefix, prefix.size()), row);
      out.push_back(lp + row[0]);
      const std::vector<double> saved = row;
      for (int t = 0; t < space_.alphabet_size; ++t) {
        prefix.push_back(t);
        self(self, lp + saved[t + 1]);
        prefix.pop_back();
      }
    };
    rec(rec, 0.0);
    return out;
  }

 private:
  explicit TabularPolicy(const TrajectorySpace& space) : space_(space) {
    trajectory_count(space);  // validates the space and the cap
    std::size_t rows = 0, pw = 1;
    for (int l = 0; l < space.max_len; ++l) {
      rows += pw;
      pw *= static_cast<std::size_t>(space.alphabet_size);
    }
    logits_.assign(rows * static_cast<std::size_t>(space.alphabet_size + 1), 0.0);
  }

  TrajectorySpace space_;
  std::vector<double> logits_;
};

inline double logsumexp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

// Exact renormalized tilt: the policy proportional to base(o)*exp(strength*r(o)),
// re-expressed as full-prefix conditionals via a suffix-sum recursion over the
// trajectory tree. Used to manufacture strong/weak proposals and exact targets.
inline TabularPolicy tilt_policy(const TabularPolicy& base, const RewardSpec& spec,
                                 double strength) {
  const TrajectorySpace& space = base.space();
  TabularPolicy tilted = base;  // same shape; logits rewritten below
  std::vector<int> prefix;
  std::vector<double> row;
  const int w = base.row_width();
  // Returns the subtree log-mass below `prefix`, given the accumulated base
  // log-prob of the prefix path; fills the tilted row for this prefix.
  auto rec = [&](auto&& self, double base_lp) -> double {
    if (static_cast<int>(prefix.size()) == space.max_len) {
      return base_lp + strength * reward(spec, space, Trajectory{prefix});
    }
    const std::size_t r = base.prefix_row(prefix, prefix.size());
    base.row_log_softmax(r, row);
    std::vector<double> child(w);
    const std::vector<double> saved = row;
    child[0] = base_lp + saved[0] + strength * reward(spec, space, Trajectory{prefix});
    for (int t = 0; t < space.alphabet_size; ++t) {
      prefix.push_back(t);
      child[t + 1] = self(self, base_lp + saved[t + 1]);
      prefix.pop_back();
    }
    const double total = logsumexp(child);
    // Store conditionals as max-shifted logits so the clamp cannot distort them.
    double mx = *std::max_element(child.begin(), child.end());
    for (int c = 0; c < w; ++c) {
      tilted.logits()[r * w + c] = std::max(child[c] - mx, -kLogitClamp);
    }
    return total;
  };
  rec(rec, 0.0);
  return tilted;
}

}  // namespace dmrl

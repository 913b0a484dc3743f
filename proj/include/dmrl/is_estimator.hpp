#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/oracle.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

enum class Aggregator { LSE, GM, LinearLog };

inline std::string aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::LSE: return "LSE";
    case Aggregator::GM: return "GM";
    case Aggregator::LinearLog: return "LINEAR-LOG";
  }
  return "?";
}

// One per-prompt offline partition-function label.
struct ISLabel {
  std::string prompt_id;
  double log_z_hat = 0.0;
  Aggregator aggregator = Aggregator::LSE;
  std::size_t n = 0;
  double measured_cv2 = 0.0;  // self-normalized sample estimate
  bool degenerate = false;    // all-(-inf) weight corner
  std::uint64_t rng_key = 0;  // stream that produced the samples
};

// Per-sample log w = log pi_ref - log p_T + beta r~.
inline std::vector<double> log_weights(const TabularPolicy& pi_ref, const TabularPolicy& p_t,
                                       const Prompt& q, const RewardSpec& spec, double beta,
                                       const std::vector<Trajectory>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const Trajectory& o : samples) {
    const double lp = p_t.log_prob(o);
    if (!std::isfinite(lp)) {
      throw ContractError("log_weights: sample has -inf proposal log-prob (support violation): " +
                          encode_trajectory(p_t.space(), o));
    }
    out.push_back(pi_ref.log_prob(o) - lp +
                  beta * reward_transform(q, reward(spec, p_t.space(), o)));
  }
  return out;
}

// Max-shifted logsumexp(list) - ln N. Shift-equivariant; the all-(-inf)
// corner yields -inf (flagged degenerate by callers), never NaN.
inline double estimate_lse(const std::vector<double>& lw) {
  if (lw.empty()) throw ContractError("estimate_lse: empty weight list");
  return logsumexp(lw) - std::log(static_cast<double>(lw.size()));
}

// Geometric-mean aggregator: arithmetic mean of log-weights. Downward-biased
// by ~CV^2/2 regardless of N.
inline double estimate_gm(const std::vector<double>& lw) {
  if (lw.empty()) throw ContractError("estimate_gm: empty weight list");
  double s = 0.0;
  for (double x : lw) {
    if (!std::isfinite(x)) return -std::numeric_limits<double>::infinity();
    s += x;
  }
  return s / static_cast<double>(lw.size());
}

// Linear-scale Z-hat = mean of exp(log-weights), via the LSE form for
// stability. Unbiased for Z.
inline double estimate_linear(const std::vector<double>& lw) {
  return std::exp(estimate_lse(lw));
}

// Self-normalized sample estimate of CV^2(w).
inline double sample_cv2(const std::vector<double>& lw) {
  if (lw.empty()) return 0.0;
  const double lse = logsumexp(lw);
  if (!std::isfinite(lse)) return 0.0;
  double s2 = 0.0;
  for (double x : lw) {
    const double u = std::exp(x - lse);  // normalized weights summing to 1
    s2 += u * u;
  }
  const double n = static_cast<double>(lw.size());
  // n * sum u^2 = E[w^2]/E[w]^2 on the sample; subtract 1 for CV^2.
  return std::max(0.0, n * s2 - 1.0);
}

// Draw N proposal samples and form one offline label.
inline ISLabel make_label(const TabularPolicy& pi_ref, const TabularPolicy& p_t, const Prompt& q,
                          const RewardSpec& spec, double beta, std::size_t n,
                          Aggregator aggregator, RngStream stream,
                          std::vector<Trajectory>* samples_out = nullptr) {
  if (n < 1) throw ContractError("make_label: need n >= 1");
  ISLabel label;
  label.prompt_id = q.id;
  label.aggregator = aggregator;
  label.n = n;
  label.rng_key = stream.key();
  const std::vector<Trajectory> samples = p_t.sample_n(stream, n);
  if (samples_out) *samples_out = samples;
  const std::vector<double> lw = log_weights(pi_ref, p_t, q, spec, beta, samples);
  switch (aggregator) {
    case Aggregator::LSE: label.log_z_hat = estimate_lse(lw); break;
    case Aggregator::GM: label.log_z_hat = estimate_gm(lw); break;
    case Aggregator::LinearLog: label.log_z_hat = std::log(estimate_linear(lw)); break;
  }
  label.measured_cv2 = sample_cv2(lw);
  label.degenerate = !std::isfinite(label.log_z_hat);
  return label;
}

// One row of the shared-pool subsampling study.
struct NStudyRow {
  std::string prompt_id;
  std::size_t m = 0;
  std::size_t replications = 0;
  double var_log_z = 0.0;
  double rel_bias_mean = 0.0;
  double rel_bias_median = 0.0;
  double exact_log_z = 0.0;
  double exact_cv2 = 0.0;
};

// Variance-bias study of the offline sample count: per prompt, draw one
// high-precision pool from p_T, treat the pool LSE estimate as
// pseudo-ground-truth, and subsample M without replacement per replication.
inline std::vector<NStudyRow> variance_bias_study(
    const TabularPolicy& pi_ref, const TabularPolicy& p_t, const std::vector<Prompt>& prompts,
    const RewardSpec& spec, double beta, std::size_t pool_size,
    const std::vector<std::size_t>& subsample_sizes, std::size_t replications, RngStream root) {
  if (replications < 10) {
    throw ContractError("variance_bias_study: fewer than 10 replications is refused");
  }
  for (std::size_t m : subsample_sizes) {
    if (m >= pool_size) throw ContractError("variance_bias_study: pool_size must exceed every M");
  }
  std::vector<NStudyRow> rows;
  for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
    const Prompt& q = prompts[pi];
    RngStream prompt_stream = RngStream::keyed(root.key(), q.id, "nstudy");
    RngStream pool_stream = prompt_stream.split(0);
    const std::vector<Trajectory> pool = p_t.sample_n(pool_stream, pool_size);
    const std::vector<double> pool_lw = log_weights(pi_ref, p_t, q, spec, beta, pool);
    const double pool_log_z = estimate_lse(pool_lw);
    const double exact_log_z = exact_log_partition(pi_ref, q, spec, beta);
    const double exact_cv2 = exact_weight_stats(pi_ref, p_t, q, spec, beta).cv2;
    std::vector<std::size_t> indices(pool_size);
    for (std::size_t m : subsample_sizes) {
      RngStream rep_stream = prompt_stream.split(1 + m);
      std::vector<double> log_zs(replications);
      std::vector<double> rel_bias(replications);
      std::vector<double> sub(m);
      for (std::size_t r = 0; r < replications; ++r) {
        for (std::size_t i = 0; i < pool_size; ++i) indices[i] = i;
        // Partial Fisher-Yates: first m entries are a without-replacement draw.
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t j = i + rep_stream.next_below(pool_size - i);
          std::swap(indices[i], indices[j]);
          sub[i] = pool_lw[indices[i]];
        }
        log_zs[r] = estimate_lse(sub);
        rel_bias[r] = std::abs(std::exp(log_zs[r]) - std::exp(pool_log_z)) / std::exp(pool_log_z);
      }
      double mean = 0.0;
      for (double x : log_zs) mean += x;
      mean /= static_cast<double>(replications);
      double var = 0.0;
      for (double x : log_zs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(replications - 1);
      double bias_mean = 0.0;
      for (double x : rel_bias) bias_mean += x;
      bias_mean /= static_cast<double>(replications);
      std::vector<double> sorted = rel_bias;
      std::sort(sorted.begin(), sorted.end());
      const double median = (replications % 2 == 1)
                                ? sorted[replications / 2]
                                : 0.5 * (sorted[replications / 2 - 1] + sorted[replications / 2]);
      rows.push_back(NStudyRow{q.id, m, replications, var, bias_mean, median, exact_log_z,
                               exact_cv2});
    }
  }
  return rows;
}

}  // namespace dmrl

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

enum class AmortizerKind { LinearRidge, OneHiddenLayer };

inline std::string amortizer_kind_name(AmortizerKind k) {
  return k == AmortizerKind::LinearRidge ? "linear-ridge" : "one-hidden-layer";
}

struct LabeledPrompt {
  std::vector<double> features;
  double log_z_hat = 0.0;
};

struct FitOptions {
  std::size_t hidden_width = 64;
  std::size_t epochs = 400;
  double learning_rate = 0.02;
};

// Frozen prompt-feature regressor for log Z. linear-ridge solves the
// regularized normal equations exactly (intercept unpenalized);
// one-hidden-layer runs full-batch gradient descent for an epoch budget and
// keeps the best-validation weights. Once frozen, predict is pure.
class Amortizer {
 public:
  Amortizer() = default;

  static Amortizer fit(const std::vector<LabeledPrompt>& labels, AmortizerKind kind,
                       double ridge_lambda, std::uint64_t split_seed,
                       const FitOptions& opt = FitOptions{});

  double predict(const std::vector<double>& features) const {
    if (!frozen_) throw ContractError("Amortizer::predict called on an unfrozen amortizer");
    if (features.size() != feature_dim_) throw ContractError("Amortizer::predict: feature dim mismatch");
    if (kind_ == AmortizerKind::LinearRidge) {
      double y = weights_.back();  // intercept
      for (std::size_t i = 0; i < feature_dim_; ++i) y += weights_[i] * features[i];
      return y;
    }
    // one-hidden-layer: tanh MLP. Layout: W1 (h x d), b1 (h), w2 (h), b2.
    const std::size_t h = hidden_width_, d = feature_dim_;
    double y = weights_[h * d + h + h];  // b2
    for (std::size_t j = 0; j < h; ++j) {
      double a = weights_[h * d + j];  // b1[j]
      for (std::size_t i = 0; i < d; ++i) a += weights_[j * d + i] * features[i];
      y += weights_[h * d + h + j] * std::tanh(a);
    }
    return y;
  }

  AmortizerKind kind() const { return kind_; }
  bool frozen() const { return frozen_; }
  std::size_t feature_dim() const { return feature_dim_; }
  double train_mse() const { return train_mse_; }
  double val_mse() const { return val_mse_; }
  double ridge_lambda() const { return ridge_lambda_; }
  std::uint64_t split_seed() const { return split_seed_; }
  std::uint64_t label_manifest() const { return label_manifest_; }
  const std::vector<double>& weights() const { return weights_; }

  // Line-oriented checkpoint; hexfloat weights so the round trip is
  // bit-exact.
  std::string serialize() const {
    std::ostringstream os;
    os << "# dmrl-amortizer v1\n";
    os << "kind " << amortizer_kind_name(kind_) << "\n";
    os << "feature_dim " << feature_dim_ << "\n";
    os << "hidden_width " << hidden_width_ << "\n";
    os << "ridge_lambda " << hexfloat(ridge_lambda_) << "\n";
    os << "split_seed " << split_seed_ << "\n";
    os << "train_mse " << hexfloat(train_mse_) << "\n";
    os << "val_mse " << hexfloat(val_mse_) << "\n";
    os << "label_manifest " << label_manifest_ << "\n";
    os << "weights " << weights_.size() << "\n";
    for (double w : weights_) os << hexfloat(w) << "\n";
    return os.str();
  }

  static Amortizer deserialize(std::istream& in) {
    Amortizer g;
    std::string line, key, value;
    auto expect = [&](const std::string& want) -> std::string {
      if (!std::getline(in, line)) throw ConfigError("amortizer checkpoint: truncated");
      std::istringstream ls(line);
      ls >> key >> value;
      if (key != want) throw ConfigError("amortizer checkpoint: expected '" + want + "'");
      return value;
    };
    if (!std::getline(in, line) || line != "# dmrl-amortizer v1") {
      throw ConfigError("amortizer checkpoint: bad header");
    }
    const std::string kind = expect("kind");
    g.kind_ = (kind == "linear-ridge") ? AmortizerKind::LinearRidge : AmortizerKind::OneHiddenLayer;
    g.feature_dim_ = std::stoull(expect("feature_dim"));
    g.hidden_width_ = std::stoull(expect("hidden_width"));
    g.ridge_lambda_ = std::strtod(expect("ridge_lambda").c_str(), nullptr);
    g.split_seed_ = std::stoull(expect("split_seed"));
    g.train_mse_ = std::strtod(expect("train_mse").c_str(), nullptr);
    g.val_mse_ = std::strtod(expect("val_mse").c_str(), nullptr);
    g.label_manifest_ = std::stoull(expect("label_manifest"));
    const std::size_t n = std::stoull(expect("weights"));
    g.weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw ConfigError("amortizer checkpoint: truncated weights");
      g.weights_[i] = std::strtod(line.c_str(), nullptr);
    }
    g.frozen_ = true;
    return g;
  }

  static std::string hexfloat(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
  }

 private:
  AmortizerKind kind_ = AmortizerKind::LinearRidge;
  bool frozen_ = false;
  std::size_t feature_dim_ = 0;
  std::size_t hidden_width_ = 0;
  std::vector<double> weights_;
  double ridge_lambda_ = 0.0;
  std::uint64_t split_seed_ = 0;
  double train_mse_ = 0.0;
  double val_mse_ = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t label_manifest_ = 0;
};

namespace detail {

// Gaussian elimination with partial pivoting; a is n x n row-major,
// overwritten. Throws on (near-)singular systems.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b,
                                        std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) < 1e-12) {
      throw ContractError(
          "rank-deficient design matrix: supply a positive ridge_lambda to regularize the fit");
    }
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const double d = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
    x[ri] = s / a[ri * n + ri];
  }
  return x;
}

inline std::uint64_t hash_labels(const std::vector<LabeledPrompt>& labels) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_double = [&](double x) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    std::memcpy(&bits, &x, sizeof(bits));
    h = mix64(h ^ bits);
  };
  for (const LabeledPrompt& l : labels) {
    for (double f : l.features) mix_double(f);
    mix_double(l.log_z_hat);
  }
  return h;
}

}  // namespace detail

inline Amortizer Amortizer::fit(const std::vector<LabeledPrompt>& labels, AmortizerKind kind,
                                double ridge_lambda, std::uint64_t split_seed,
                                const FitOptions& opt) {
  if (labels.empty()) throw ContractError("Amortizer::fit: no labels");
  const std::size_t d = labels[0].features.size();
  for (const LabeledPrompt& l : labels) {
    if (l.features.size() != d) throw ContractError("Amortizer::fit: inconsistent feature dims");
    if (!std::isfinite(l.log_z_hat)) {
      throw ContractError("Amortizer::fit: non-finite label (degenerate Stage-1 estimate)");
    }
  }

  // Seeded 90/10 train/validation split by shuffled index.
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle = RngStream::keyed(split_seed, "amortizer-split");
  for (std::size_t i = order.size(); i-- > 1;) {
    std::swap(order[i], order[shuffle.next_below(i + 1)]);
  }
  std::size_t n_val = labels.size() >= 10 ? labels.size() / 10
                      : labels.size() >= 3 ? 1
                                           : 0;
  std::vector<const LabeledPrompt*> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).push_back(&labels[order[i]]);
  }
  if (train.empty()) throw ContractError("Amortizer::fit: no training labels after split");

  Amortizer g;
  g.kind_ = kind;
  g.feature_dim_ = d;
  g.ridge_lambda_ = ridge_lambda;
  g.split_seed_ = split_seed;
  g.label_manifest_ = detail::hash_labels(labels);

  auto mse_on = [&](const std::vector<const LabeledPrompt*>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const LabeledPrompt* l : set) {
      const double e = g.predict(l->features) - l->log_z_hat;
      s += e * e;
    }
    return s / static_cast<double>(set.size());
  };

  if (kind == AmortizerKind::LinearRidge) {
    // Normal equations on [x, 1] with ridge on the slope block only.
    const std::size_t p = d + 1;
    std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
    for (const LabeledPrompt* l : train) {
      std::vector<double> row(l->features);
      row.push_back(1.0);
      for (std::size_t i = 0; i < p; ++i) {
        xty[i] += row[i] * l->log_z_hat;
        for (std::size_t j = 0; j < p; ++j) xtx[i * p + j] += row[i] * row[j];
      }
    }
    for (std::size_t i = 0; i < d; ++i) xtx[i * p + i] += ridge_lambda;
    g.weights_ = detail::solve_linear(std::move(xtx), std::move(xty), p);
    g.frozen_ = true;
  } else {
    const std::size_t h = opt.hidden_width;
    g.hidden_width_ = h;
    const std::size_t nw = h * d + h + h + 1;
    std::vector<double> w(nw);
    RngStream init = RngStream::keyed(split_seed, "amortizer-init");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d + 1));
    for (std::size_t i = 0; i < nw; ++i) w[i] = (2.0 * init.next_double() - 1.0) * scale;
    w[nw - 1] = 0.0;

    std::vector<double> grad(nw), act(h);
    std::vector<double> best_w = w;
    double best_val = std::numeric_limits<double>::infinity();
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const LabeledPrompt* l : train) {
        double y = w[h * d + h + h];
        for (std::size_t j = 0; j < h; ++j) {
          double a = w[h * d + j];
          for (std::size_t i = 0; i < d; ++i) a += w[j * d + i] * l->features[i];
          act[j] = std::tanh(a);
          y += w[h * d + h + j] * act[j];
        }
        const double e = 2.0 * (y - l->log_z_hat) * inv_n;
        grad[nw - 1] += e;
        for (std::size_t j = 0; j < h; ++j) {
          grad[h * d + h + j] += e * act[j];
          const double back = e * w[h * d + h + j] * (1.0 - act[j] * act[j]);
          grad[h * d + j] += back;
          for (std::size_t i = 0; i < d; ++i) grad[j * d + i] += back * l->features[i];
        }
      }
      for (std::size_t i = 0; i < nw; ++i) {
        w[i] -= opt.learning_rate * (grad[i] + 2.0 * ridge_lambda * inv_n * w[i]);
      }
      g.weights_ = w;
      g.frozen_ = true;  // transient: evaluate MSE through predict()
      const double v = val.empty() ? mse_on(train) : mse_on(val);
      if (v < best_val) {
        best_val = v;
        best_w = w;
      }
      g.frozen_ = false;
    }
    g.weights_ = std::move(best_w);
    g.frozen_ = true;
  }

  g.train_mse_ = mse_on(train);
  g.val_mse_ = mse_on(val);
  return g;
}

// RMS of g(q) - exact log Z(q) over a prompt set (Cauchy-Schwarz envelope
// input).
inline double sigma_g(const Amortizer& g, const std::vector<std::vector<double>>& features,
                      const std::vector<double>& exact_log_z) {
  if (features.size() != exact_log_z.size() || features.empty()) {
    throw ContractError("sigma_g: mismatched or empty inputs");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double e = g.predict(features[i]) - exact_log_z[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(features.size()));
}

}  // namespace dmrl

#pragma once

#include <cmath>
#include <optional>
#include <span>

#include "greedvmaf/error.hpp"

namespace greedvmaf {

// Shape search interval for kurtosis matching. Kurtosis outside
// [ggd_kurtosis(kBetaMax), ggd_kurtosis(kBetaMin)] clamps to an endpoint.
inline constexpr double kBetaMin = 0.1;
inline constexpr double kBetaMax = 10.0;
inline constexpr int kBisectionIterations = 200;

namespace detail {
// log of Gamma(a)/Gamma(b); all GGD moment ratios go through log-gamma.
inline double log_gamma_ratio(double a, double b) { return std::lgamma(a) - std::lgamma(b); }
}  // namespace detail

/// Zero-mean generalized Gaussian: f(x) = beta / (2 alpha Gamma(1/beta)) exp(-(|x|/alpha)^beta).
struct GGDParams {
  double alpha = 1.0;
  double beta = 2.0;

  GGDParams() = default;
  GGDParams(double a, double b) : alpha(a), beta(b) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("GGD scale must be positive and finite");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("GGD shape must be positive and finite");
  }

  double variance() const {
    return alpha * alpha * std::exp(detail::log_gamma_ratio(3.0 / beta, 1.0 / beta));
  }
  double kurtosis() const;
};

/// Gamma(1/b) Gamma(5/b) / Gamma(3/b)^2. Strictly decreasing in b; 3 at b = 2.
inline double ggd_kurtosis(double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("GGD shape must be positive");
  return std::exp(std::lgamma(1.0 / beta) + std::lgamma(5.0 / beta) - 2.0 * std::lgamma(3.0 / beta));
}

inline double GGDParams::kurtosis() const { return ggd_kurtosis(beta); }

/// Differential entropy in nats: 1/beta - log(beta / (2 alpha Gamma(1/beta))).
inline double ggd_entropy(const GGDParams& p) {
  return 1.0 / p.beta - std::log(p.beta) + std::log(2.0 * p.alpha) + std::lgamma(1.0 / p.beta);
}

/// Inverts ggd_kurtosis by bisection on [kBetaMin, kBetaMax].
inline double match_shape(double kurtosis) {
  const double k_lo = ggd_kurtosis(kBetaMax);  // smallest reachable kurtosis
  const double k_hi = ggd_kurtosis(kBetaMin);
  if (!(kurtosis > k_lo)) return kBetaMax;
  if (!(kurtosis < k_hi)) return kBetaMin;
  const double target = std::log(kurtosis);
  double lo = kBetaMin, hi = kBetaMax;
  for (int i = 0; i < kBisectionIterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (std::log(ggd_kurtosis(mid)) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Kurtosis matching from precomputed moments. Returns nullopt when the
/// variance is not positive (degenerate distribution).
inline std::optional<GGDParams> fit_ggd_from_moments(double variance, double kurtosis) {
  if (!(variance > 0.0) || !std::isfinite(variance)) return std::nullopt;
  if (!std::isfinite(kurtosis)) throw InvalidArgument("kurtosis must be finite");
  const double beta = match_shape(kurtosis);
  const double alpha = std::sqrt(variance * std::exp(detail::log_gamma_ratio(1.0 / beta, 3.0 / beta)));
  return GGDParams(alpha, beta);
}

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // population (1/n) second central moment
  double kurtosis = 0.0;  // m4 / m2^2; 0 when variance is 0
};

inline SampleMoments sample_moments(std::span<const double> x) {
  SampleMoments m;
  if (x.empty()) return m;
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  m.mean = s / n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  m.variance = m2;
  m.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
  return m;
}

/// Fits a GGD to raw samples. Throws on fewer than 4 samples; nullopt for zero variance.
inline std::optional<GGDParams> fit_ggd_kurtosis_match(std::span<const double> samples) {
  if (samples.size() < 4) throw InvalidArgument("kurtosis matching needs at least 4 samples");
  const auto m = sample_moments(samples);
  return fit_ggd_from_moments(m.variance, m.kurtosis);
}

/// GGD refit of X + N(0, sigma_n2) for independent X ~ params, by exact
/// propagation of the second and fourth moments.
inline GGDParams apply_neural_noise(const GGDParams& params, double sigma_n2) {
  if (!(sigma_n2 >= 0.0) || !std::isfinite(sigma_n2)) throw InvalidArgument("noise variance must be >= 0");
  if (sigma_n2 == 0.0) return params;
  const double var = params.variance();
  const double kurt = params.kurtosis();
  const double out_var = var + sigma_n2;
  const double out_kurt =
      (kurt * var * var + 6.0 * var * sigma_n2 + 3.0 * sigma_n2 * sigma_n2) / (out_var * out_var);
  return *fit_ggd_from_moments(out_var, out_kurt);
}

}  // namespace greedvmaf

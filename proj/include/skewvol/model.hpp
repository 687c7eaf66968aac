// SPDX-License-Identifier: MIT
#pragma once

/// Two-valued local-volatility model: parameters and coordinate maps.
///
/// The price process solves  dS_t = sigma(log S_t) S_t dW_t,  S_0 = 1, with
///
///     sigma(x) = sigma_plus   for x >= 0   (price at or above the threshold 1)
///               = sigma_minus  for x <  0   (price below the threshold),
///
/// zero rates and dividends.  The threshold is normalized to R = 1; callers
/// with a general threshold divide spot and strike by R before use.
///
/// The natural coordinate for analysis is
///
///     X_t = log(S_t)/sigma_plus   if S_t >= 1,
///           log(S_t)/sigma_minus  if S_t <  1,
///
/// under which the dynamics become a skew Brownian motion with two-valued
/// drift.  The derived weights
///
///     p = sigma_minus / (sigma_minus + sigma_plus),
///     q = sigma_plus  / (sigma_minus + sigma_plus)
///
/// are the excursion weights of the skew process (probability of an excursion
/// above/below the threshold), and sigma_atm0 = 2 sigma_minus sigma_plus /
/// (sigma_minus + sigma_plus) = 2 p sigma_plus = 2 q sigma_minus is the
/// harmonic-mean volatility the ATM implied vol converges to as T -> 0.

#include <cmath>
#include <stdexcept>
#include <string>

namespace skewvol {

/// Payoff side of a vanilla option.
enum class Side { Call, Put };

/// Immutable model parameterization with derived constants.
struct ModelParams {
  double sigma_plus = 0.0;   ///< volatility on {log S >= 0}, per sqrt(year)
  double sigma_minus = 0.0;  ///< volatility on {log S < 0}, per sqrt(year)
  double p = 0.0;            ///< sigma_minus / (sigma_minus + sigma_plus)
  double q = 0.0;            ///< sigma_plus  / (sigma_minus + sigma_plus)
  double sigma_atm0 = 0.0;   ///< 2 sigma_minus sigma_plus / (sigma_minus + sigma_plus)

  /// Volatility at SBM coordinate x; the boundary x = 0 belongs to the
  /// upper branch.
  [[nodiscard]] double sigma_at(double x) const noexcept {
    return x >= 0.0 ? sigma_plus : sigma_minus;
  }

  /// Excursion weight at coordinate x (p above the threshold, q below);
  /// alpha(0) = p by the same boundary convention as sigma_at.
  [[nodiscard]] double alpha_at(double x) const noexcept {
    return x >= 0.0 ? p : q;
  }

  [[nodiscard]] bool degenerate() const noexcept {
    return sigma_plus == sigma_minus;
  }

  /// Relative gap |sigma_plus - sigma_minus| / max(sigma_plus, sigma_minus);
  /// drives the degenerate-branch switching in the special functions.
  [[nodiscard]] double relative_gap() const noexcept {
    return std::abs(sigma_plus - sigma_minus) / std::fmax(sigma_plus, sigma_minus);
  }
};

/// Builds validated model parameters with the derived constants populated.
///
/// Throws std::domain_error for non-positive or non-finite volatilities and
/// for values outside [1e-12, 1e3], which would ill-condition the downstream
/// quadrature.
[[nodiscard]] inline ModelParams new_params(double sigma_plus, double sigma_minus) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0)
      throw std::domain_error(std::string(name) + " must be positive and finite");
    if (v <= 1e-12 || v >= 1e3)
      throw std::domain_error(std::string(name) + " outside supported range (1e-12, 1e3)");
  };
  check(sigma_plus, "sigma_plus");
  check(sigma_minus, "sigma_minus");
  ModelParams m;
  m.sigma_plus = sigma_plus;
  m.sigma_minus = sigma_minus;
  const double denom = sigma_minus + sigma_plus;
  m.p = sigma_minus / denom;
  m.q = sigma_plus / denom;
  m.sigma_atm0 = 2.0 * sigma_minus * sigma_plus / denom;
  return m;
}

/// SBM coordinate of a price: log(s)/sigma_plus for s >= 1, log(s)/sigma_minus
/// for s < 1.  Continuous, strictly increasing, x_of_s(1) = 0.
[[nodiscard]] inline double x_of_s(double s, const ModelParams& m) {
  if (!(s > 0.0)) throw std::domain_error("x_of_s: price must be positive");
  const double ls = std::log(s);
  return ls >= 0.0 ? ls / m.sigma_plus : ls / m.sigma_minus;
}

/// Exact inverse of x_of_s: exp(sigma_plus x) for x >= 0, exp(sigma_minus x)
/// for x < 0.
[[nodiscard]] inline double s_of_x(double x, const ModelParams& m) noexcept {
  return x >= 0.0 ? std::exp(m.sigma_plus * x) : std::exp(m.sigma_minus * x);
}

/// Vanilla option contract terms (threshold-normalized units: S_0 = 1).
struct OptionSpec {
  double strike = 1.0;   ///< K > 0
  double maturity = 1.0; ///< T > 0, years
  Side side = Side::Call;
};

/// Validates an OptionSpec; throws std::domain_error on bad terms.
inline void validate(const OptionSpec& spec) {
  if (!std::isfinite(spec.strike) || spec.strike <= 0.0)
    throw std::domain_error("strike must be positive and finite");
  if (!std::isfinite(spec.maturity) || spec.maturity <= 0.0)
    throw std::domain_error("maturity must be positive and finite");
}

}  // namespace skewvol

// SPDX-License-Identifier: MIT
#pragma once

/// Scalar special functions used throughout the library: Gaussian CDF, error
/// function and its inverse, the Brownian first-passage density h, the
/// exponentially weighted first-passage transform psi, the density kernel phi
/// of the threshold coordinate, and the closed form of its time integral.
///
/// Everything here is pure, stateless double-precision arithmetic.  Error
/// budget: norm_cdf/erf are within 1-2 ulp (libm erfc); erf_inv is a rational
/// minimax seed refined by two Newton steps (| erf(erf_inv(y)) - y | <= 1e-14
/// for |y| <= 1 - 1e-12); psi and phi are accurate to ~1e-14 relative away
/// from the degenerate-parameter switch and ~1e-10 in the switch band.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "skewvol/model.hpp"

namespace skewvol {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double sqrt_two_pi = 2.5066282746310005024;  // sqrt(2*pi)

/// Standard normal density.
[[nodiscard]] inline double norm_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) / sqrt_two_pi;
}

/// Standard normal CDF via the complementary error function; accurate to
/// ~1 ulp over the full double range, saturating cleanly in the far tails.
[[nodiscard]] inline double norm_cdf(double z) noexcept {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Error function (libm).
[[nodiscard]] inline double erf(double x) noexcept { return std::erf(x); }

namespace detail {

/// Rational minimax inverse of the standard normal CDF (Acklam's
/// approximation, relative error ~1.15e-9); refined by callers.
[[nodiscard]] inline double norm_ppf_seed(double pr) noexcept {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (pr < p_low) {
    const double u = std::sqrt(-2.0 * std::log(pr));
    return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  if (pr > 1.0 - p_low) {
    const double u = std::sqrt(-2.0 * std::log1p(-pr));
    return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double g = pr - 0.5;
  const double r = g * g;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * g /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

/// log of the standard normal CDF, stable for arbitrarily negative z.
[[nodiscard]] inline double log_norm_cdf(double z) noexcept {
  if (z > -37.0) return std::log(norm_cdf(z));
  // Asymptotic expansion of Mills' ratio; v <= 7.4e-4 here, so the
  // truncation error is below double rounding.
  const double v = 1.0 / (z * z);
  return -0.5 * z * z - std::log(-z) - 0.5 * std::log(two_pi) +
         std::log1p(v * (-1.0 + v * (3.0 + v * (-15.0 + v * 105.0))));
}

}  // namespace detail

/// Inverse error function on (-1, 1): rational minimax seed plus two Newton
/// refinements against libm erf.  Throws std::domain_error for |y| >= 1.
[[nodiscard]] inline double erf_inv(double y) {
  if (!(std::abs(y) < 1.0)) throw std::domain_error("erf_inv: argument must satisfy |y| < 1");
  if (y == 0.0) return 0.0;
  double x = detail::norm_ppf_seed(0.5 * (y + 1.0)) / std::numbers::sqrt2;
  constexpr double two_over_sqrt_pi = 1.1283791670955125739;
  for (int i = 0; i < 2; ++i) {
    const double deriv = two_over_sqrt_pi * std::exp(-x * x);
    if (deriv <= 0.0) break;  // saturated far tail: rational seed is as good as it gets
    const double step = (std::erf(x) - y) / deriv;
    if (!std::isfinite(step)) break;
    x -= step;
  }
  return x;
}

/// First-passage density of a standard Brownian motion started at y hitting 0:
///   h(s, y) = |y| / sqrt(2 pi s^3) * exp(-y^2 / (2 s)).
/// Symmetric in y, h(s, 0) = 0.  Throws std::domain_error for s <= 0.
[[nodiscard]] inline double fpt_density_h(double s, double y) {
  if (!(s > 0.0)) throw std::domain_error("fpt_density_h: s must be positive");
  if (y == 0.0) return 0.0;
  return std::abs(y) / std::sqrt(two_pi * s * s * s) * std::exp(-y * y / (2.0 * s));
}

/// Which side of the kink at k = 0 the function psi is evaluated on.  The
/// sign convention sgn(0) = +1 (Above) matches the defining integral over
/// [k, infinity); the Below variant (sgn(0) = -1) is the k -> 0- limit needed
/// when an at-the-threshold expression is derived from the put side.
enum class KinkSide { Above, Below };

/// The exponentially weighted first-passage transform
///   psi(a, s, k) = integral over x in [k, inf) (k >= 0) resp. (-inf, k]
///   (k < 0) of e^{a x} h(s, x) dx, in closed form:
///   e^{a k - k^2/(2 s)} / sqrt(2 pi s)
///     + a sgn(k) e^{a^2 s / 2} N(sgn(k) (a s - k) / sqrt(s)).
/// The second term is evaluated through log N to stay finite when
/// a^2 s / 2 alone would overflow.  Throws std::domain_error for s <= 0.
[[nodiscard]] inline double psi(double a, double s, double k,
                                KinkSide side = KinkSide::Above) {
  if (!(s > 0.0)) throw std::domain_error("psi: s must be positive");
  const double sg = (k > 0.0 || (k == 0.0 && side == KinkSide::Above)) ? 1.0 : -1.0;
  const double rs = std::sqrt(s);
  const double term1 = std::exp(a * k - k * k / (2.0 * s)) / (sqrt_two_pi * rs);
  if (a == 0.0) return term1;
  const double z = sg * (a * s - k) / rs;
  const double mag = std::exp(0.5 * a * a * s + detail::log_norm_cdf(z));
  return term1 + a * sg * mag;
}

/// psi(a, s, k) e^{-a^2 s / 2} with the damping folded into both terms:
///   e^{-(k - a s)^2 / (2 s)} / sqrt(2 pi s) + a sgn(k) N(sgn(k)(a s - k)/sqrt(s)).
/// Every factor is bounded by max(1, |a|) plus the Gaussian peak, so the
/// product never overflows where the two factors separately would.
[[nodiscard]] inline double psi_damped(double a, double s, double k,
                                       KinkSide side = KinkSide::Above) {
  if (!(s > 0.0)) throw std::domain_error("psi_damped: s must be positive");
  const double sg = (k > 0.0 || (k == 0.0 && side == KinkSide::Above)) ? 1.0 : -1.0;
  const double rs = std::sqrt(s);
  const double d = k - a * s;
  const double term1 = std::exp(-d * d / (2.0 * s)) / (sqrt_two_pi * rs);
  if (a == 0.0) return term1;
  return term1 + a * sg * norm_cdf(-sg * d / rs);
}

/// Evaluation policy for phi / phi_integral near the degenerate parameter
/// line sigma_plus = sigma_minus, where the closed forms have (sigma_plus -
/// sigma_minus) denominators.
///
/// DegenerateLimit (the default) switches to a second-order series in the
/// half-gap around the midpoint volatility once the relative gap drops below
/// `threshold`; Exact always uses the closed form (except at exactly equal
/// volatilities, where only the limit exists).
struct PhiEvalMode {
  enum class Mode { Exact, DegenerateLimit };
  Mode mode = Mode::DegenerateLimit;
  double threshold = 1e-6;
};

namespace detail {

[[nodiscard]] inline bool use_degenerate_branch(const ModelParams& m,
                                                const PhiEvalMode& mode) {
  if (!(mode.threshold > 0.0) || mode.threshold > 1e-3)
    throw std::invalid_argument("PhiEvalMode: threshold must lie in (0, 1e-3]");
  if (m.degenerate()) return true;
  return mode.mode == PhiEvalMode::Mode::DegenerateLimit &&
         m.relative_gap() < mode.threshold;
}

}  // namespace detail

/// The density kernel of the threshold coordinate:
///   phi(t) = [s+ e^{-s-^2 t/8} - s- e^{-s+^2 t/8}] / (sqrt(2 pi t)(s+ - s-))
///            + (s+ s- / (2 (s+ - s-))) (N(sqrt(t) s-/2) - N(sqrt(t) s+/2)),
/// writing s+ = sigma_plus, s- = sigma_minus.  Symmetric under swapping the
/// two volatilities; phi(t) ~ 1/sqrt(2 pi t) as t -> 0; degenerate limit
/// e^{-sigma^2 t/8} / sqrt(2 pi t).  Throws std::domain_error for t <= 0.
[[nodiscard]] inline double phi(double t, const ModelParams& m,
                                const PhiEvalMode& mode = {}) {
  if (!(t > 0.0)) throw std::domain_error("phi: t must be positive");
  const double sp = m.sigma_plus, sm = m.sigma_minus;
  if (!detail::use_degenerate_branch(m, mode)) {
    const double g1 = (sp * std::exp(-sm * sm * t / 8.0) - sm * std::exp(-sp * sp * t / 8.0)) /
                      ((sp - sm) * std::sqrt(two_pi * t));
    const double g2 = sp * sm / (2.0 * (sp - sm)) *
                      (norm_cdf(std::sqrt(t) * sm / 2.0) - norm_cdf(std::sqrt(t) * sp / 2.0));
    return g1 + g2;
  }
  // Second-order series in the half-gap d around the midpoint volatility mu.
  const double mu = 0.5 * (sp + sm), d = 0.5 * (sp - sm);
  const double u = std::exp(-mu * mu * t / 8.0);
  const double up = -(mu * t / 4.0) * u;
  const double upp = u * (mu * mu * t * t / 16.0 - t / 4.0);
  const double uppp = u * (-(mu * t / 4.0) * (mu * mu * t * t / 16.0 - t / 4.0) + mu * t * t / 8.0);
  const double g1 = (u - mu * up + d * d * (0.5 * upp - mu * uppp / 6.0)) / std::sqrt(two_pi * t);
  const double w = std::sqrt(t) * mu / 2.0;
  const double pw = norm_pdf(w);
  const double g2 = -(sp * sm / 2.0) *
                    (0.5 * std::sqrt(t) * pw + d * d * (t * std::sqrt(t) / 48.0) * (w * w - 1.0) * pw);
  return g1 + g2;
}

/// Closed form of the integral of phi over [0, T].
///
/// Via I(x) = sqrt(8 T) e^{-x^2 T/8} / (x sqrt(pi)) + (4/x^2 + T) Erf(x sqrt(T)/sqrt(8)):
///   integral = (s-+s+)/(s- s+) * s-^2 s+^2 / (4 (s-^2 - s+^2)) * (I(s+) - I(s-)),
/// reducing to (2/sigma) Erf(sigma sqrt(T)/sqrt(8)) at equal volatilities.
/// Monotone increasing in T, equals 0 at T = 0.  Throws for T < 0.
[[nodiscard]] inline double phi_integral(double T, const ModelParams& m,
                                         const PhiEvalMode& mode = {}) {
  if (T < 0.0) throw std::domain_error("phi_integral: T must be non-negative");
  if (T == 0.0) return 0.0;
  const double sp = m.sigma_plus, sm = m.sigma_minus;
  const double to_integral = (sm + sp) / (sm * sp);  // divides out p*sigma_plus
  if (!detail::use_degenerate_branch(m, mode)) {
    auto I = [T](double x) {
      return std::sqrt(8.0 * T) / (x * std::sqrt(std::numbers::pi)) * std::exp(-x * x * T / 8.0) +
             (4.0 / (x * x) + T) * std::erf(x * std::sqrt(T) / std::sqrt(8.0));
    };
    const double core = sm * sm * sp * sp / (4.0 * (sm * sm - sp * sp)) * (I(sp) - I(sm));
    return core * to_integral;
  }
  // Series in the half-gap d around the midpoint mu; uses the exact
  // cancellation I'(x) = -8 Erf(x sqrt(T)/sqrt(8)) / x^3.
  const double mu = 0.5 * (sp + sm), d = 0.5 * (sp - sm);
  const double rT8 = std::sqrt(T / 8.0);
  const double E = std::erf(mu * rT8);
  const double Ep = 2.0 / std::sqrt(std::numbers::pi) * rT8 * std::exp(-mu * mu * T / 8.0);
  const double Epp = Ep * (-mu * T / 4.0);
  const double Iprime = -8.0 * E / (mu * mu * mu);
  const double I3 = -96.0 * E / std::pow(mu, 5) + 48.0 * Ep / std::pow(mu, 4) - 8.0 * Epp / (mu * mu * mu);
  const double core = -(sp * sp * sm * sm / (16.0 * mu)) * (2.0 * Iprime + d * d * I3 / 3.0);
  return core * to_integral;
}

namespace detail {

/// Regularized lower incomplete gamma P(a, x) by series (x < a + 1) or
/// continued fraction (otherwise); standard double-precision evaluation.
[[nodiscard]] inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz's continued fraction for Q(a, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, dd = 1.0 / b, hh = dd;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < tiny) dd = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    dd = 1.0 / dd;
    const double delta = dd * c;
    hh *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * hh;
  return 1.0 - q;
}

/// Upper tail of the chi-square distribution with df degrees of freedom:
/// P(X > stat) = Q(df/2, stat/2).
[[nodiscard]] inline double chi_square_tail(double stat, double df) {
  if (stat <= 0.0) return 1.0;
  return 1.0 - gamma_p(0.5 * df, 0.5 * stat);
}

}  // namespace detail

}  // namespace skewvol

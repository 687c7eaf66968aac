// SPDX-License-Identifier: MIT
#pragma once

/// Implied-volatility machinery: Black-Scholes inversion, the closed-form
/// at-the-money implied volatility, the log-strike derivative of the call
/// price, the exact and asymptotic at-the-money skew, the limiting smile of
/// the central-limit regime, and full smile tables.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "skewvol/model.hpp"
#include "skewvol/pricing.hpp"
#include "skewvol/quadrature.hpp"
#include "skewvol/specfun.hpp"

namespace skewvol {

/// Branch of the limiting short-maturity smile quadratic.
enum class CLRBranch { CallBranch, PutBranch };

/// Horizontal axis of a smile table.
enum class MoneynessAxis { Strike, LogMoneyness, DeltaMoneyness };

/// The at-the-money skew at one maturity, with its short-maturity asymptote
/// and a finite-difference cross-check on the same quadrature backend.
struct SkewReport {
  double T = 0.0;
  double skew_exact = 0.0; ///< d(implied vol)/d(log K) at K = 1
  double skew_asym = 0.0;  ///< sqrt(pi/(2T)) (s+ - s-)/(s- + s+)
  double skew_fd = 0.0;    ///< finite-difference skew from repriced quotes
  double atm_vol = 0.0;    ///< at-the-money implied volatility
};

/// One strike of a smile table.  Rows where pricing or inversion fails keep
/// ok = false, a diagnostic message, and NaN in the unfilled fields.
struct SmileRow {
  double strike = std::numeric_limits<double>::quiet_NaN();
  double axis_value = std::numeric_limits<double>::quiet_NaN();
  double price_exact = std::numeric_limits<double>::quiet_NaN();
  double iv_exact = std::numeric_limits<double>::quiet_NaN();
  double price_approx2p = std::numeric_limits<double>::quiet_NaN();
  double iv_approx2p = std::numeric_limits<double>::quiet_NaN();
  double price_approx_ratio = std::numeric_limits<double>::quiet_NaN();
  double iv_approx_ratio = std::numeric_limits<double>::quiet_NaN();
  double iv_err_2p = std::numeric_limits<double>::quiet_NaN();
  double iv_err_ratio = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

/// Black-Scholes implied volatility of a target price: the unique sigma
/// with bs(sigma, spec) = target, found by a bracketed Newton-bisection
/// hybrid on sigma in [1e-8, 10] that runs the bracket down to roundoff, so
/// the returned volatility is accurate wherever the forward map carries
/// information (the price is always matched to 1e-12 or better).  The
/// quadrature policy is accepted for signature uniformity with the
/// model-price operations; the closed-form map needs none.  Targets outside
/// the open static no-arbitrage band, or outside the price range of the
/// volatility bracket, raise std::domain_error naming the violated bound.
[[nodiscard]] inline double implied_vol(double target_price, const OptionSpec& spec,
                                        [[maybe_unused]] const QuadSpec& quad =
                                            default_pricing_quad()) {
  validate(spec);
  if (!std::isfinite(target_price))
    throw std::domain_error("implied_vol: target price must be finite");
  const double K = spec.strike, T = spec.maturity;
  const bool is_call = spec.side == Side::Call;
  const double lower = is_call ? std::max(1.0 - K, 0.0) : std::max(K - 1.0, 0.0);
  const double upper = is_call ? 1.0 : K;
  if (!(target_price > lower))
    throw std::domain_error(
        "implied_vol: target is at or below the intrinsic lower bound");
  if (!(target_price < upper))
    throw std::domain_error(
        "implied_vol: target is at or above the upper no-arbitrage bound");
  const auto price_at = [&](double sigma) {
    return is_call ? bs_call(sigma, K, T) : bs_put(sigma, K, T);
  };
  double lo = 1e-8, hi = 10.0;
  const double f_lo = price_at(lo) - target_price;
  if (f_lo == 0.0) return lo;
  if (f_lo > 0.0)
    throw std::domain_error(
        "implied_vol: target lies below the price at the lower volatility bound");
  const double f_hi = price_at(hi) - target_price;
  if (f_hi == 0.0) return hi;
  if (f_hi < 0.0)
    throw std::domain_error(
        "implied_vol: target lies above the price at the upper volatility bound");
  const double rt = std::sqrt(T);
  double sigma = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double f = price_at(sigma) - target_price;
    if (f == 0.0) return sigma;
    (f > 0.0 ? hi : lo) = sigma;
    if (hi - lo <= 1e-14 * std::max(1.0, lo)) break;
    const double sq = sigma * rt;
    const double d1 = -std::log(K) / sq + sq / 2.0;
    const double vega = rt * std::exp(-0.5 * d1 * d1) / sqrt_two_pi;
    const double next = sigma - f / vega;
    // fall back to bisection when Newton leaves the bracket (or vega
    // degenerates to 0, making next non-finite)
    sigma = next > lo && next < hi ? next : 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

/// Closed-form at-the-money implied volatility,
///   sigma_atm(T) = sqrt(8/T) erf_inv(V_atm(T)),
/// which tends to the harmonic blend 2 s- s+ / (s- + s+) as T -> 0.
[[nodiscard]] inline double atm_implied_vol(double T, const ModelParams& params) {
  if (!(T > 0.0)) throw std::domain_error("atm_implied_vol: T must be positive");
  return std::sqrt(8.0 / T) * erf_inv(atm_price(T, params).value);
}

/// Derivative of the call price in the log strike k = log K, for k >= 0:
///   dC/dk = -2 (s- / (s- + s+)) F(T, -s+/2, k/s+) e^k.
/// Near k = 0 it behaves like -s-/(s-+s+) + (s- s+/(s-+s+)) sqrt(T/(2 pi)).
[[nodiscard]] inline double dC_dk(double k, double T, const ModelParams& params,
                                  const QuadSpec& quad = default_pricing_quad()) {
  if (!(k >= 0.0)) throw std::domain_error("dC_dk: requires k >= 0");
  if (!(T > 0.0)) throw std::domain_error("dC_dk: T must be positive");
  return -2.0 * params.p * F(T, -params.sigma_plus / 2.0, k / params.sigma_plus,
                             params, quad) *
         std::exp(k);
}

namespace detail {

/// Implied volatility of the exactly-priced option at log strike k.
[[nodiscard]] inline double iv_at_log_strike(double k, double T,
                                             const ModelParams& params,
                                             const QuadSpec& quad) {
  if (k == 0.0) return atm_implied_vol(T, params);
  const double K = std::exp(k);
  const OptionSpec spec{K, T, k > 0.0 ? Side::Call : Side::Put};
  const double px = k > 0.0 ? call_price(K, T, params, quad).value
                            : put_price(K, T, params, quad).value;
  return implied_vol(px, spec, quad);
}

/// Finite-difference at-the-money skew with explicit step h: the average of
/// the second-order one-sided stencils taken from each wing.  The smile's
/// curvature jumps across k = 0, so a plain central difference is only
/// first-order accurate there; each one-sided stencil stays O(h^2) on its
/// own smooth wing, and their average restores symmetric treatment.
[[nodiscard]] inline double skew_fd_step(double T, const ModelParams& params,
                                         const QuadSpec& quad, double h) {
  const double f0 = atm_implied_vol(T, params);
  const double right = (-3.0 * f0 + 4.0 * iv_at_log_strike(h, T, params, quad) -
                        iv_at_log_strike(2.0 * h, T, params, quad)) /
                       (2.0 * h);
  const double left = (3.0 * f0 - 4.0 * iv_at_log_strike(-h, T, params, quad) +
                       iv_at_log_strike(-2.0 * h, T, params, quad)) /
                      (2.0 * h);
  return 0.5 * (right + left);
}

} // namespace detail

/// At-the-money skew report at maturity T:
///   skew_exact = sqrt(pi/(2T)) e^{sigma_atm(T)^2 T / 8}
///                (1 - 2p (F(T, -s+/2, 0) + F(T, s+/2, 0))),
/// its short-maturity asymptote sqrt(pi/(2T)) (s+ - s-)/(s- + s+), the
/// closed-form ATM volatility, and a finite-difference skew recomputed from
/// repriced quotes with step h = 1e-4 max(1, sigma_atm sqrt(T)).
[[nodiscard]] inline SkewReport atm_skew_exact(double T, const ModelParams& params,
                                               const QuadSpec& quad =
                                                   default_pricing_quad()) {
  if (!(T > 0.0)) throw std::domain_error("atm_skew_exact: T must be positive");
  const double atm_vol = atm_implied_vol(T, params);
  const double sp = params.sigma_plus, sm = params.sigma_minus;
  const double f_sum = F(T, -sp / 2.0, 0.0, params, quad) +
                       F(T, sp / 2.0, 0.0, params, quad);
  const double root = std::sqrt(std::numbers::pi / (2.0 * T));
  const double skew_exact =
      root * std::exp(atm_vol * atm_vol * T / 8.0) * (1.0 - 2.0 * params.p * f_sum);
  const double skew_asym = root * (sp - sm) / (sm + sp);
  const double h = 1e-4 * std::max(1.0, atm_vol * std::sqrt(T));
  return {T, skew_exact, skew_asym, detail::skew_fd_step(T, params, quad, h),
          atm_vol};
}

/// Limiting implied volatility along the central-limit scaling k = g sqrt(T)
/// as T -> 0: a quadratic in g whose branches share the constant and linear
/// coefficients but differ in curvature,
///   call branch: 2p s+ + sqrt(pi/2) (1 - 2p) g + ((4p^2 - 1)/(4p s+)) g^2,
///   put branch:  2q s- + sqrt(pi/2) (2q - 1) g + ((4q^2 - 1)/(4q s-)) g^2.
/// Documented validity |g| <= 0.5 sigma_atm(0).
[[nodiscard]] inline double clr_sigma(double gamma, const ModelParams& params,
                                      CLRBranch branch) {
  const double slope_root = std::sqrt(std::numbers::pi / 2.0);
  if (branch == CLRBranch::CallBranch) {
    const double p = params.p, sp = params.sigma_plus;
    return 2.0 * p * sp + slope_root * (1.0 - 2.0 * p) * gamma +
           (4.0 * p * p - 1.0) / (4.0 * p * sp) * gamma * gamma;
  }
  const double q = params.q, sm = params.sigma_minus;
  return 2.0 * q * sm + slope_root * (2.0 * q - 1.0) * gamma +
         (4.0 * q * q - 1.0) / (4.0 * q * sm) * gamma * gamma;
}

/// Branch chosen by the sign of gamma; gamma = 0 uses the call branch (the
/// branches agree in value and slope there).
[[nodiscard]] inline double clr_sigma(double gamma, const ModelParams& params) {
  return clr_sigma(gamma, params,
                   gamma < 0.0 ? CLRBranch::PutBranch : CLRBranch::CallBranch);
}

/// Smile table at maturity T over a positive, distinct strike grid.  Each
/// row quotes the out-of-the-money side of its strike (calls from K >= 1,
/// puts below), whose implied volatility is side-independent by parity:
/// exact price and vol, both Black-Scholes approximations (the 2p-weighted
/// form and the ATM-ratio-corrected form, both continued to K = 1 through
/// their call-side limit) with their vols, and the absolute vol errors.
/// The DeltaMoneyness axis is log(K/S0)/(iv sqrt(T)) with the row's own
/// exact implied volatility.  Rows whose pricing or inversion fails are
/// returned with ok = false and a diagnostic instead of aborting the table.
[[nodiscard]] inline std::vector<SmileRow> smile(double T,
                                                 const std::vector<double>& strike_grid,
                                                 const ModelParams& params,
                                                 const QuadSpec& quad =
                                                     default_pricing_quad(),
                                                 MoneynessAxis axis =
                                                     MoneynessAxis::Strike) {
  if (!(T > 0.0)) throw std::domain_error("smile: T must be positive");
  for (std::size_t i = 0; i < strike_grid.size(); ++i) {
    if (!(strike_grid[i] > 0.0) || !std::isfinite(strike_grid[i]))
      throw std::domain_error("smile: strikes must be positive and finite");
    for (std::size_t j = i + 1; j < strike_grid.size(); ++j)
      if (strike_grid[i] == strike_grid[j])
        throw std::domain_error("smile: strikes must be distinct");
  }
  std::vector<SmileRow> rows;
  rows.reserve(strike_grid.size());
  for (const double K : strike_grid) {
    SmileRow row;
    row.strike = K;
    try {
      const bool call_side = K >= 1.0;
      const OptionSpec spec{K, T, call_side ? Side::Call : Side::Put};
      row.price_exact = K == 1.0 ? atm_price(T, params).value
                        : call_side ? call_price(K, T, params, quad).value
                                    : put_price(K, T, params, quad).value;
      row.iv_exact = implied_vol(row.price_exact, spec, quad);
      const double atm = atm_price(T, params).value;
      if (call_side) {
        const double bs = bs_call(params.sigma_plus, K, T);
        row.price_approx2p = 2.0 * params.p * bs;
        row.price_approx_ratio = atm / bs_atm(params.sigma_plus, T) * bs;
      } else {
        const double bs = bs_put(params.sigma_minus, K, T);
        row.price_approx2p = 2.0 * params.q * bs;
        row.price_approx_ratio = atm / bs_atm(params.sigma_minus, T) * bs;
      }
      row.iv_approx2p = implied_vol(row.price_approx2p, spec, quad);
      row.iv_approx_ratio = implied_vol(row.price_approx_ratio, spec, quad);
      row.iv_err_2p = std::abs(row.iv_exact - row.iv_approx2p);
      row.iv_err_ratio = std::abs(row.iv_exact - row.iv_approx_ratio);
      switch (axis) {
        case MoneynessAxis::Strike: row.axis_value = K; break;
        case MoneynessAxis::LogMoneyness: row.axis_value = std::log(K); break;
        case MoneynessAxis::DeltaMoneyness:
          row.axis_value = std::log(K) / (row.iv_exact * std::sqrt(T));
          break;
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

} // namespace skewvol

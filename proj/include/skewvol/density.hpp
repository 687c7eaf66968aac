// SPDX-License-Identifier: MIT
#pragma once

/// Distributional results for the two-regime model: the joint density of
/// (last interface visit, upper-regime occupation, terminal coordinate,
/// interface local time), its generalization to a skew diffusion with a
/// two-valued drift, and the marginal terminal density with its p:q jump
/// across the interface.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "skewvol/model.hpp"
#include "skewvol/quadrature.hpp"
#include "skewvol/specfun.hpp"

namespace skewvol {

/// A point in the support of the joint law of (tau, V, X_T, L_T):
/// tau = t is the last visit to the interface, V = v the time spent in the
/// upper regime before tau, x the terminal coordinate, l the accumulated
/// symmetric local time at the interface.
struct JointPoint {
  double t = 0.5;  ///< last interface visit, years
  double v = 0.25; ///< upper-regime occupation before t, years
  double x = 0.0;  ///< terminal coordinate
  double l = 0.0;  ///< local time at the interface, >= 0
  double T = 1.0;  ///< horizon, years
};

/// Drift specification for a skew Brownian motion with two-valued drift:
/// dZ = m(Z)dt + (p-q)dL_t + dW_t with m(z) = m1 for z >= 0, m2 for z < 0,
/// and excursion weight p = P(excursion above), q = 1 - p.
struct DriftSpec {
  double m1 = 0.0; ///< drift on {z >= 0}, per year
  double m2 = 0.0; ///< drift on {z < 0}, per year
  double p = 0.5;  ///< probability weight of the upper side, in [0, 1]
};

namespace detail {

inline void validate_point(const JointPoint& pt) {
  if (!(std::isfinite(pt.t) && std::isfinite(pt.v) && std::isfinite(pt.x) &&
        std::isfinite(pt.l) && std::isfinite(pt.T)))
    throw std::domain_error("JointPoint: fields must be finite");
  if (!(pt.T > 0.0)) throw std::domain_error("JointPoint: T must be positive");
  if (!(0.0 <= pt.v && pt.v <= pt.t && pt.t <= pt.T))
    throw std::domain_error("JointPoint: requires 0 <= v <= t <= T");
  if (!(pt.l >= 0.0)) throw std::domain_error("JointPoint: l must be non-negative");
}

/// First-passage density extended by continuity to a zero time argument,
/// where it vanishes (the boundary of the support carries no mass).
[[nodiscard]] inline double h_or_zero(double s, double y) {
  return s == 0.0 ? 0.0 : fpt_density_h(s, y);
}

} // namespace detail

/// Joint density of (tau, V, Z_T, L_T) for the skew diffusion started at
/// the interface:
///
///   f_T(t, v, x, l) = 2 a(x) h(v, l p) h(t - v, l q) h(T - t, x)
///                     * exp(-(m1^2 v + m2^2 (t-v) + m(x)^2 (T-t)) / 2
///                           - l (p m1 - q m2) + m(x) x),
///
/// where a(x) = p for x >= 0 and q otherwise.  Throws std::domain_error if
/// the point violates 0 <= v <= t <= T, l >= 0 or the weight p lies
/// outside [0, 1].
[[nodiscard]] inline double joint_density_general(const JointPoint& pt,
                                                  const DriftSpec& drift) {
  detail::validate_point(pt);
  if (!(std::isfinite(drift.m1) && std::isfinite(drift.m2)))
    throw std::domain_error("DriftSpec: drifts must be finite");
  if (!(drift.p >= 0.0 && drift.p <= 1.0))
    throw std::domain_error("DriftSpec: p must lie in [0, 1]");
  const double q = 1.0 - drift.p;
  const double alpha = pt.x >= 0.0 ? drift.p : q;
  const double mx = pt.x >= 0.0 ? drift.m1 : drift.m2;
  const double shape = 2.0 * alpha * detail::h_or_zero(pt.v, pt.l * drift.p) *
                       detail::h_or_zero(pt.t - pt.v, pt.l * q) *
                       detail::h_or_zero(pt.T - pt.t, pt.x);
  if (shape == 0.0) return 0.0;
  const double expo = -0.5 * (drift.m1 * drift.m1 * pt.v +
                              drift.m2 * drift.m2 * (pt.t - pt.v) +
                              mx * mx * (pt.T - pt.t)) -
                      pt.l * (drift.p * drift.m1 - q * drift.m2) + mx * pt.x;
  return shape * std::exp(expo);
}

/// Joint density of (tau, V, X_T, L_T) for the model coordinate process.
/// Specializes joint_density_general to m1 = -sigma_plus/2,
/// m2 = -sigma_minus/2 and the model's excursion weights, for which
/// p m1 - q m2 = 0 and the local-time term in the exponent drops out:
///
///   f_T(t, v, x, l) = 2 a(x) h(v, l p) h(t - v, l q) h(T - t, x)
///     * exp(-(s+^2 v + s-^2 (t-v) + s(x)^2 (T-t)) / 8 - s(x) x / 2).
[[nodiscard]] inline double joint_density_model(const JointPoint& pt,
                                                const ModelParams& params) {
  detail::validate_point(pt);
  const double sp = params.sigma_plus, sm = params.sigma_minus;
  const double sx = params.sigma_at(pt.x);
  const double shape = 2.0 * params.alpha_at(pt.x) *
                       detail::h_or_zero(pt.v, pt.l * params.p) *
                       detail::h_or_zero(pt.t - pt.v, pt.l * params.q) *
                       detail::h_or_zero(pt.T - pt.t, pt.x);
  if (shape == 0.0) return 0.0;
  const double expo =
      -(sp * sp * pt.v + sm * sm * (pt.t - pt.v) + sx * sx * (pt.T - pt.t)) / 8.0 -
      sx * pt.x / 2.0;
  return shape * std::exp(expo);
}

/// Terminal density of the coordinate process started at the interface:
///
///   p(0, x, T) = 2 a(x) e^{-s(x) x / 2}
///                * Int_0^T phi(T - s) h(s, x) e^{-s(x)^2 s / 8} ds.
///
/// Evaluated through the substitution z = |x| / sqrt(s), which turns
/// h(s, x) ds into sqrt(2/pi) e^{-z^2/2} dz; the remaining inverse-square-
/// root blow-up of phi near s = T sits at the lower z endpoint and is
/// handled by the annotated finite-interval rule.  At x = 0 the function
/// returns the upper-side limit 2 p phi(T); the lower-side limit is
/// 2 q phi(T), so the density jumps across the interface in the ratio p:q.
/// Throws std::domain_error for T <= 0 or non-finite x.
[[nodiscard]] inline double marginal_density(double x, double T,
                                             const ModelParams& params) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::domain_error("marginal_density: T must be positive");
  if (!std::isfinite(x)) throw std::domain_error("marginal_density: x must be finite");
  if (x == 0.0) return 2.0 * params.p * phi(T, params);

  const double sx = params.sigma_at(x);
  const double z0 = std::abs(x) / std::sqrt(T);
  // The drift tilt e^{-s(x) x / 2} lives inside the integrand's exponent:
  // kept separate it overflows for large |x| while the z-integral
  // underflows, and inf * 0 poisons outer quadratures over x.
  const auto tail_weight = [&](double z) {
    const double t_arg = T - x * x / (z * z);
    if (!(t_arg > 0.0)) return 0.0; // rounding at the endpoint, zero measure
    return std::exp(-sx * x / 2.0 - 0.5 * z * z -
                    sx * sx * (x * x) / (8.0 * z * z)) *
           phi(t_arg, params);
  };

  QuadSpec near_spec;
  near_spec.rel_tol = 1e-11;
  near_spec.abs_tol = 0.0;
  near_spec.max_subdivisions = 1024;
  near_spec.left_singularity = Singularity::InvSqrt;
  const QuadResult near = integrate(tail_weight, z0, z0 + 12.0, near_spec);

  QuadSpec far_spec = near_spec;
  far_spec.left_singularity = Singularity::None;
  const QuadResult far = integrate_half_infinite(tail_weight, z0 + 12.0, far_spec);

  return 2.0 * params.alpha_at(x) * std::sqrt(2.0 / std::numbers::pi) *
         (near.value + far.value);
}

namespace detail {

/// Closed form of Int_0^inf h(v, l p) h(u, l q) dl
///   = p q / (2 sqrt(2 pi) (p^2 u + q^2 v)^{3/2}),   u > 0 or v > 0.
/// Collapses the local-time dimension of the joint density exactly.
[[nodiscard]] inline double local_time_marginal(double v, double u, double p,
                                                double q) {
  const double d = p * p * u + q * q * v;
  return p * q / (2.0 * sqrt_two_pi * d * std::sqrt(d));
}

/// Int_0^inf l h(v, l p) h(u, l q) dl = p q sqrt(v u) / (pi (p^2 u + q^2 v)^2).
[[nodiscard]] inline double local_time_first_moment(double v, double u, double p,
                                                    double q) {
  const double d = p * p * u + q * q * v;
  return p * q * std::sqrt(v * u) / (std::numbers::pi * d * d);
}

/// x-marginal weight of the post-last-visit leg of length s:
///   Int over x of h(s, x) 2 a(x) e^{-s(x) x / 2 - s(x)^2 s / 8} dx
///   = 2 p e^{-s+^2 s/8} psi(-s+/2, s, 0) + 2 q e^{-s-^2 s/8} psi(s-/2, s, 0).
/// Behaves like 2 / sqrt(2 pi s) as s -> 0.
[[nodiscard]] inline double x_factor(double s, const ModelParams& params) {
  const double sp = params.sigma_plus, sm = params.sigma_minus;
  return 2.0 * params.p * std::exp(-sp * sp * s / 8.0) * psi(-0.5 * sp, s, 0.0) +
         2.0 * params.q * std::exp(-sm * sm * s / 8.0) * psi(0.5 * sm, s, 0.0);
}

/// Density of the upper-regime occupation time accumulated before the
/// last interface visit, at v in (0, T).  Integrating the local-time and
/// terminal dimensions out of the joint density leaves
///
///   rho(v) = Int_v^T  pq / (2 sqrt(2 pi) (p^2 (t - v) + q^2 v)^{3/2})
///            * e^{-(s+^2 v + s-^2 (t - v)) / 8} x_factor(T - t) dt,
///
/// where t runs over the possible last visits.  Integrates to 1 over
/// (0, T).
[[nodiscard]] inline double occupation_density(double v, double T,
                                               const ModelParams& params) {
  if (!(T > 0.0)) throw std::domain_error("occupation_density: T must be positive");
  if (!(v > 0.0 && v < T))
    throw std::domain_error("occupation_density: v must lie in (0, T)");
  const double sp = params.sigma_plus, sm = params.sigma_minus;
  QuadSpec spec;
  spec.rel_tol = 1e-11;
  spec.abs_tol = 0.0;
  spec.max_subdivisions = 1024;
  spec.right_singularity = Singularity::InvSqrt; // x_factor(T - t) ~ (T - t)^{-1/2}
  const QuadResult r = integrate(
      [&](double t) {
        const double s = T - t;
        if (s <= 0.0) return 0.0; // endpoint rounding, zero measure
        return local_time_marginal(v, t - v, params.p, params.q) *
               std::exp(-(sp * sp * v + sm * sm * (t - v)) / 8.0) *
               x_factor(s, params);
      },
      v, T, spec);
  return r.value;
}

} // namespace detail

} // namespace skewvol

// SPDX-License-Identifier: MIT
#pragma once

/// @file mc.hpp
/// Monte Carlo engine for the two-regime log-price diffusion: path simulation
/// under an Euler scheme (with hidden-crossing correction) or an exact
/// interface kernel, extraction of the path functionals entering the density
/// formulas (terminal level, interface local time, first/last visit times,
/// pre-last-visit occupation), pricing estimates with antithetic pairing, and
/// chi-square goodness-of-fit validation of the simulated laws against the
/// analytic densities.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "skewvol/density.hpp"
#include "skewvol/model.hpp"
#include "skewvol/quadrature.hpp"
#include "skewvol/specfun.hpp"

namespace skewvol {

/// Path discretization scheme.
///
/// EulerPrice: log-Euler steps of the price equation with the regime
/// volatility frozen at the left grid point, plus a Brownian-bridge test for
/// interface touches hidden between grid points.  The price bias decays only
/// like the square root of the step size because the scheme ignores the
/// volatility switch inside a step.
///
/// InterfaceExact: Strang splitting of drift and diffusion where the
/// diffusion sub-step samples the exact transition kernel of the driftless
/// skew Brownian motion, so regime switching inside a step is handled
/// exactly; the residual bias comes only from the drift splitting.
enum class Scheme { EulerPrice, InterfaceExact };

/// Simulation request: path count, steps per unit maturity, seed, antithetic
/// pairing, and scheme.
struct SimConfig {
  std::uint64_t n_paths = 100000;
  std::uint64_t n_steps = 250;  ///< time steps per year
  std::uint64_t seed = 1;
  bool antithetic = false;
  Scheme scheme = Scheme::EulerPrice;
};

/// Validates a simulation request.  Throws std::invalid_argument if
/// n_paths < 1, n_steps < 16, or antithetic pairing is requested with an odd
/// path count or with the interface-exact scheme (whose rejection sampler
/// consumes a data-dependent number of draws, which breaks the pairwise
/// mirroring of the random stream).
inline void validate(const SimConfig& cfg) {
  if (cfg.n_paths < 1)
    throw std::invalid_argument("SimConfig: n_paths must be at least 1");
  if (cfg.n_steps < 16)
    throw std::invalid_argument("SimConfig: n_steps must be at least 16 per year");
  if (cfg.antithetic) {
    if (cfg.n_paths % 2 != 0)
      throw std::invalid_argument("SimConfig: antithetic pairing needs an even n_paths");
    if (cfg.scheme != Scheme::EulerPrice)
      throw std::invalid_argument(
          "SimConfig: antithetic pairing is only defined for the Euler scheme");
  }
}

/// Functionals of one simulated path of the normalized process X:
///   x_T   terminal level,
///   l_T   interface local time accumulated by time T, sampled per touching
///         step from the closed-form bridge-conditional local-time law,
///   tau   last interface visit time,
///   tau0  first interface visit time (the process starts on the interface,
///         so this is always 0),
///   v     occupation time of the upper regime before the last visit.
/// Invariants: 0 <= tau0 <= tau <= T, 0 <= v <= tau - tau0, l_T >= 0.
struct FunctionalSample {
  double x_T = 0.0;
  double l_T = 0.0;
  double tau = 0.0;
  double tau0 = 0.0;
  double v = 0.0;
};

/// Price estimate with its standard error.  For antithetic runs the standard
/// error is computed over pair averages, which is the correct estimator when
/// mirrored paths are correlated.
struct McPriceResult {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Bin layout for the goodness-of-fit tests.  Each non-empty edge list
/// enables the corresponding marginal test; edges must be strictly
/// increasing and are extended by the natural support boundaries
/// (+-infinity for x, [0, infinity) for l, [0, T] for v).  pair_xl enables
/// the joint (x, l) cell test and requires both x_edges and l_edges.
struct GofBinning {
  std::vector<double> x_edges;
  std::vector<double> l_edges;
  std::vector<double> v_edges;
  bool pair_xl = false;
};

/// One chi-square test outcome.
struct GofResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

namespace detail {

/// SplitMix64 step: advances the state and returns one mixed 64-bit word.
/// Used only for seeding the main generator.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with a per-substream seeding recipe: the state is derived by
/// SplitMix64 from (seed, stream), so path i always consumes the same draws
/// no matter how paths are distributed over worker threads.
struct Xoshiro256pp {
  std::uint64_t s[4];

  Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& w : s) w = splitmix64(x);
    if ((s[0] | s[1] | s[2] | s[3]) == 0) s[0] = 1;  // all-zero state is absorbing
  }

  [[nodiscard]] static constexpr std::uint64_t rotl(std::uint64_t v, int k) noexcept {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t next() noexcept {
    const std::uint64_t out = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return out;
  }

  /// Uniform draw strictly inside (0, 1): 53-bit mantissa centered half a ulp
  /// off the lattice so that neither endpoint is attainable.
  [[nodiscard]] double uniform() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }
};

/// Ziggurat tables for the standard normal (128 layers), built once at first
/// use from the classical layer recursion.
struct ZigTables {
  static constexpr int layers = 128;
  double x[layers + 1];      ///< layer abscissas, x[0] = V/f(R) pseudo-box
  double ratio[layers];      ///< x[i+1] / x[i] acceptance thresholds
  static constexpr double r = 3.442619855899;
  static constexpr double v = 9.91256303526217e-3;

  ZigTables() noexcept {
    double f = std::exp(-0.5 * r * r);
    x[0] = v / f;
    x[1] = r;
    x[layers] = 0.0;
    for (int i = 2; i < layers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(v / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < layers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

[[nodiscard]] inline const ZigTables& zig_tables() noexcept {
  static const ZigTables tables;
  return tables;
}

/// Ziggurat normal generator: the common case costs a single 64-bit draw
/// (low 7 bits select the layer, the rest form the signed uniform); wedge
/// and tail cases fall back to explicit density comparisons.
struct NormalGen {
  Xoshiro256pp& rng;
  const ZigTables& zt = zig_tables();

  double operator()() noexcept {
    for (;;) {
      const std::uint64_t j = rng.next();
      const int i = static_cast<int>(j & 127);
      const double u =
          static_cast<double>(static_cast<std::int64_t>(j) >> 7) * 0x1.0p-56;
      if (std::abs(u) < zt.ratio[i]) return u * zt.x[i];
      if (i == 0) {  // tail beyond R: exact exponential-rejection sampler
        double xx, yy;
        do {
          xx = -std::log(rng.uniform()) / ZigTables::r;
          yy = -std::log(rng.uniform());
        } while (yy + yy < xx * xx);
        return u < 0.0 ? -(ZigTables::r + xx) : ZigTables::r + xx;
      }
      const double xcand = u * zt.x[i];
      const double f0 = std::exp(-0.5 * (zt.x[i] * zt.x[i] - xcand * xcand));
      const double f1 = std::exp(-0.5 * (zt.x[i + 1] * zt.x[i + 1] - xcand * xcand));
      if (f1 + rng.uniform() * (f0 - f1) < 1.0) return xcand;
    }
  }
};

/// Worker count: SKEWVOL_THREADS if set and positive (capped at 512),
/// otherwise the hardware concurrency.
[[nodiscard]] inline unsigned thread_count() noexcept {
  if (const char* env = std::getenv("SKEWVOL_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end != env && n >= 1)
      return static_cast<unsigned>(std::min(n, 512ul));
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

/// Runs fn(begin, end) over a partition of [0, n_items) on up to
/// thread_count() threads.  All randomness is seeded per item, so results
/// are identical for any thread count.
template <typename Fn>
inline void parallel_ranges(std::uint64_t n_items, Fn&& fn) {
  const std::uint64_t workers =
      std::min<std::uint64_t>(thread_count(), std::max<std::uint64_t>(n_items, 1));
  if (workers <= 1) {
    fn(std::uint64_t{0}, n_items);
    return;
  }
  const std::uint64_t chunk = (n_items + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t b = w * chunk;
    const std::uint64_t e = std::min(n_items, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, &errors, b, e, w] {
      try {
        fn(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

/// Accumulates the path functionals over consecutive time segments.  The
/// process starts on the interface, so the first visit time is identically 0
/// and the pre-last-visit occupation reduces to the upper-regime occupation
/// up to the last visit.  Local time arrives pre-sampled per segment (see
/// euler_step / ie_step): each interface-visiting segment contributes a draw
/// from the exact bridge-conditional local-time law, so the accumulated l has
/// no band-width bias.
struct PathFunctionals {
  double t = 0.0;    ///< clock after the segments consumed so far
  double occ = 0.0;  ///< occupation time of {x >= 0} on [0, t]
  double tau = 0.0;  ///< last interface visit seen so far
  double v = 0.0;    ///< occ evaluated at tau
  double l = 0.0;    ///< accumulated interface local time

  void visit(double t_visit, double occ_at_visit) noexcept {
    tau = t_visit;
    v = occ_at_visit;
  }

  /// Records an interface visit at the current clock without consuming time
  /// (used for crossings inside the zero-duration drift stages of the
  /// splitting scheme).
  void visit_now() noexcept { visit(t, occ); }

  /// Segment between grid levels x0 -> x1 contributing local time ell.  A
  /// sign change locates the hit by linear interpolation of X; touched
  /// reports a hit known to the scheme even though the endpoints share a
  /// sign (hidden Brownian-bridge crossing or a reflected excursion), booked
  /// at mid-segment.
  void advance(double x0, double x1, double dt, bool touched, double ell) noexcept {
    const bool s0 = x0 >= 0.0, s1 = x1 >= 0.0;
    if (s0 != s1) {
      const double a0 = std::abs(x0), a1 = std::abs(x1);
      const double frac = a0 / (a0 + a1);
      visit(t + frac * dt, occ + (s0 ? frac * dt : 0.0));
      occ += (s0 ? frac : 1.0 - frac) * dt;
    } else {
      const double pos = s0 ? dt : 0.0;
      if (x1 == 0.0)
        visit(t + dt, occ + pos);
      else if (x0 == 0.0)
        visit_now();
      else if (touched)
        visit(t + 0.5 * dt, occ + 0.5 * pos);
      occ += pos;
    }
    l += ell;
    t += dt;
  }

  [[nodiscard]] FunctionalSample finish(double x_T) const noexcept {
    return {x_T, l, tau, 0.0, v};
  }
};

/// Precomputed per-step constants of the Euler scheme.
struct EulerCoef {
  double dt, inv_dt, sqdt;
  double drift_p, drift_m;    ///< -sigma^2 dt / 2 per regime
  double vol_p, vol_m;        ///< sigma sqrt(dt) per regime
  double inv_sp, inv_sm;      ///< 1 / sigma per regime
  double lt_pref_p, lt_pref_m;  ///< (sigma_+ + sigma_-) / (2 sigma) per regime

  EulerCoef(const ModelParams& m, double dt_) noexcept
      : dt(dt_),
        inv_dt(1.0 / dt_),
        sqdt(std::sqrt(dt_)),
        drift_p(-0.5 * m.sigma_plus * m.sigma_plus * dt_),
        drift_m(-0.5 * m.sigma_minus * m.sigma_minus * dt_),
        vol_p(m.sigma_plus * sqdt),
        vol_m(m.sigma_minus * sqdt),
        inv_sp(1.0 / m.sigma_plus),
        inv_sm(1.0 / m.sigma_minus),
        lt_pref_p(0.5 * (m.sigma_plus + m.sigma_minus) / m.sigma_plus),
        lt_pref_m(0.5 * (m.sigma_plus + m.sigma_minus) / m.sigma_minus) {}
};

/// One Euler macro-step of the log price and its X image.  Within a step the
/// log price is a Brownian bridge at the frozen start-side volatility, so a
/// same-side step touches the interface with probability exp(-2 x0 x1 / dt)
/// (X has unit diffusion on the frozen side).  A touching step accrues local
/// time drawn from the exact bridge-conditional law
///   P(ell > l | endpoints, touch) = exp(-((m + l)^2 - m^2) / (2 dt)),
/// inverted in closed form with m the sum of the endpoint distances in
/// frozen-side units; the kinked X scaling multiplies the draw by
/// (sigma_+ + sigma_-) / (2 sigma_frozen), which is 1 in the single-regime
/// case where the estimator is exact in law.  Uniforms are requested from
/// uget only when actually consumed, so single-path runs can draw them
/// lazily while antithetic pairs pass pre-drawn shared values.
struct EulerState {
  double y = 0.0;  ///< log price
  double x = 0.0;  ///< normalized level
};

template <typename UniformFn>
inline void euler_step(EulerState& st, PathFunctionals& acc, const EulerCoef& c,
                       double z, UniformFn&& uget) {
  const bool up = st.y >= 0.0;
  const double y1 = st.y + (up ? c.drift_p + c.vol_p * z : c.drift_m + c.vol_m * z);
  const double x1 = y1 >= 0.0 ? y1 * c.inv_sp : y1 * c.inv_sm;
  const double a = 2.0 * st.x * x1;
  bool touched = false;
  if (a <= 0.0)
    touched = true;  // sign change, or an endpoint pinned on the interface
  else if (a < 37.0 * c.dt)
    touched = uget() < std::exp(-a * c.inv_dt);
  double ell = 0.0;
  if (touched) {
    const double m = std::abs(st.x) + std::abs(y1) * (up ? c.inv_sp : c.inv_sm);
    ell = (up ? c.lt_pref_p : c.lt_pref_m) *
          (std::sqrt(m * m - 2.0 * c.dt * std::log(uget())) - m);
  }
  acc.advance(st.x, x1, c.dt, touched, ell);
  st.y = y1;
  st.x = x1;
}

/// Exact flow of the inter-arrival drift dx/dt = -sigma(x)/2 over h.  Sets
/// t_cross to the interface hitting time if the trajectory reaches it
/// (downward only, since both regime drifts are negative), else to -1.
[[nodiscard]] inline double drift_flow(double x, double h, const ModelParams& m,
                                       double& t_cross) noexcept {
  t_cross = -1.0;
  if (x > 0.0) {
    const double tc = 2.0 * x / m.sigma_plus;
    if (tc > h) return x - 0.5 * m.sigma_plus * h;
    t_cross = tc;
    return -0.5 * m.sigma_minus * (h - tc);
  }
  if (x == 0.0) {
    t_cross = 0.0;
    return -0.5 * m.sigma_minus * h;
  }
  return x - 0.5 * m.sigma_minus * h;
}

/// Levels beyond far_hat * sqrt(dt) take the plain Gaussian shortcut in the
/// skew kernel; the neglected interface mass is below 3e-7 per step, far
/// beneath the statistical resolution of any feasible path count.
inline constexpr double far_hat = 5.0;

/// Samples a standard normal conditioned on exceeding lo (lo >= 0): plain
/// rejection while the acceptance odds stay moderate, Marsaglia's exponential
/// tail proposal once lo is large enough that raw rejection would stall.
[[nodiscard]] inline double normal_tail(Xoshiro256pp& rng, NormalGen& normal,
                                        double lo) noexcept {
  if (lo < 1.0) {
    for (;;) {
      const double z = normal();
      if (z > lo) return z;
    }
  }
  for (;;) {
    const double e1 = -std::log(rng.uniform()) / lo;
    const double e2 = -std::log(rng.uniform());
    if (e2 + e2 >= e1 * e1) return lo + e1;
  }
}

/// Samples the endpoint of a driftless skew Brownian step of length dt
/// started at x >= 0 with skew parameter alpha (probability of a positive
/// excursion).  Sequential decomposition of the transition density: propose
/// the free Gaussian endpoint y; a positive y avoids the interface with the
/// Brownian-bridge probability 1 - exp(-2 x y / dt) and is kept unchanged.
/// Otherwise the path touched, and conditionally on touching the endpoint is
/// an alpha-signed folded Gaussian tail: magnitude sqrt(dt) z - x with
/// z > x / sqrt(dt), positive with probability alpha.  Both stages are
/// exact: the reflection identity phi_dt(y - x) exp(-2 x y / dt) =
/// phi_dt(y + x) shows the kept mass is phi_dt(y - x) - phi_dt(y + x) on
/// y > 0 and the touched remainder 2 phi_dt(|y| + x) split alpha versus
/// 1 - alpha by sign.  touched reports whether the sampled piece visits the
/// interface.
[[nodiscard]] inline double skew_kernel_nonneg(double x, double dt, double sqdt,
                                               double alpha, Xoshiro256pp& rng,
                                               NormalGen& normal, bool& touched) {
  if (x > far_hat * sqdt) {
    touched = false;
    return x + sqdt * normal();
  }
  const double y = x + sqdt * normal();
  if (y > 0.0) {
    const double a = 2.0 * x * y / dt;
    if (a >= 37.0 || rng.uniform() < -std::expm1(-a)) {
      touched = false;
      return y;
    }
  }
  touched = true;
  const double sign = rng.uniform() < alpha ? 1.0 : -1.0;
  return sign * (sqdt * normal_tail(rng, normal, x / sqdt) - x);
}

/// Skew step from either side; a negative start is handled by the mirror
/// identity (X from x < 0 is the negative of a skew motion with parameter
/// 1 - alpha started at -x).
[[nodiscard]] inline double skew_step(double x, double dt, double sqdt, double p_skew,
                                      Xoshiro256pp& rng, NormalGen& normal,
                                      bool& touched) {
  if (x >= 0.0)
    return skew_kernel_nonneg(x, dt, sqdt, p_skew, rng, normal, touched);
  return -skew_kernel_nonneg(-x, dt, sqdt, 1.0 - p_skew, rng, normal, touched);
}

/// One Strang macro-step of the interface-exact scheme: exact half-drift,
/// exact driftless skew transition over dt, exact half-drift.  Occupation and
/// local time are booked over the diffusion stage (which carries the clock);
/// a touching stage accrues local time drawn from the same closed-form
/// bridge-conditional law as the Euler scheme (exact here, since the stage is
/// a unit-diffusion skew motion and the conditional law of its local time
/// given the endpoint magnitudes does not involve the skew weight).
/// Drift-stage crossings are booked as instantaneous visits and accrue no
/// local time, matching the zero local time of bounded-variation flows.
inline void ie_step(double& x, PathFunctionals* acc, const ModelParams& m, double dt,
                    double sqdt, Xoshiro256pp& rng, NormalGen& normal) {
  const double h = 0.5 * dt;
  double tc;
  const double x1 = drift_flow(x, h, m, tc);
  if (acc != nullptr && tc >= 0.0) acc->visit_now();
  bool touched;
  const double x2 = skew_step(x1, dt, sqdt, m.p, rng, normal, touched);
  if (acc != nullptr) {
    double ell = 0.0;
    if (touched) {
      const double mm = std::abs(x1) + std::abs(x2);
      ell = std::sqrt(mm * mm - 2.0 * dt * std::log(rng.uniform())) - mm;
    }
    acc->advance(x1, x2, dt, touched, ell);
  }
  const double x3 = drift_flow(x2, h, m, tc);
  if (acc != nullptr && tc >= 0.0) acc->visit_now();
  x = x3;
}

/// Total step count for maturity T at cfg.n_steps steps per year.
[[nodiscard]] inline std::uint64_t total_steps(double T, const SimConfig& cfg) noexcept {
  const double raw = std::ceil(static_cast<double>(cfg.n_steps) * T);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(raw));
}

}  // namespace detail

/// Simulates cfg.n_paths paths of the normalized process on [0, T] and
/// returns their functionals in path-index order.  Path i consumes a
/// dedicated substream derived from (cfg.seed, i), so the output is
/// independent of the number of worker threads; with antithetic pairing,
/// paths 2j and 2j+1 share the substream of index 2j with negated Gaussian
/// and flipped uniform draws.
[[nodiscard]] inline std::vector<FunctionalSample> simulate(const ModelParams& params,
                                                            double T,
                                                            const SimConfig& cfg) {
  validate(cfg);
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::domain_error("simulate: T must be positive and finite");
  const std::uint64_t steps = detail::total_steps(T, cfg);
  const double dt = T / static_cast<double>(steps);
  const detail::EulerCoef coef(params, dt);
  const double sqdt = coef.sqdt;
  std::vector<FunctionalSample> out(cfg.n_paths);

  if (cfg.antithetic) {
    const std::uint64_t n_pairs = cfg.n_paths / 2;
    detail::parallel_ranges(n_pairs, [&](std::uint64_t jb, std::uint64_t je) {
      for (std::uint64_t j = jb; j < je; ++j) {
        detail::Xoshiro256pp rng(cfg.seed, 2 * j);
        detail::NormalGen normal{rng};
        detail::EulerState sa, sb;
        detail::PathFunctionals aa, ab;
        for (std::uint64_t i = 0; i < steps; ++i) {
          const double z = normal();
          // Shared pre-drawn uniforms keep the pair in lockstep: a step
          // consumes at most one for the hidden-touch test and one for the
          // local-time draw, in that order.
          const double u = rng.uniform();
          const double u2 = rng.uniform();
          detail::euler_step(sa, aa, coef, z,
                             [u, u2, k = 0]() mutable { return k++ == 0 ? u : u2; });
          detail::euler_step(sb, ab, coef, -z, [u, u2, k = 0]() mutable {
            return k++ == 0 ? 1.0 - u : 1.0 - u2;
          });
        }
        out[2 * j] = aa.finish(sa.x);
        out[2 * j + 1] = ab.finish(sb.x);
      }
    });
    return out;
  }

  detail::parallel_ranges(cfg.n_paths, [&](std::uint64_t ib, std::uint64_t ie) {
    for (std::uint64_t i = ib; i < ie; ++i) {
      detail::Xoshiro256pp rng(cfg.seed, i);
      detail::NormalGen normal{rng};
      if (cfg.scheme == Scheme::EulerPrice) {
        detail::EulerState st;
        detail::PathFunctionals acc;
        for (std::uint64_t k = 0; k < steps; ++k)
          detail::euler_step(st, acc, coef, normal(), [&rng] { return rng.uniform(); });
        out[i] = acc.finish(st.x);
      } else {
        double x = 0.0;
        detail::PathFunctionals acc;
        for (std::uint64_t k = 0; k < steps; ++k)
          detail::ie_step(x, &acc, params, dt, sqdt, rng, normal);
        out[i] = acc.finish(x);
      }
    }
  });
  return out;
}

/// Monte Carlo price of a vanilla contract.  Estimates E[(S_T - K)^+] or
/// E[(K - S_T)^+] from cfg.n_paths terminal levels; the estimate and its
/// standard error come from per-path (or, with antithetic pairing, per-pair
/// average) payoffs.  Partial sums are accumulated over fixed blocks of path
/// indices and reduced in index order, so the result is bit-identical for
/// any worker count.
[[nodiscard]] inline McPriceResult mc_price(const OptionSpec& spec,
                                            const ModelParams& params,
                                            const SimConfig& cfg) {
  validate(spec);
  validate(cfg);
  const std::uint64_t steps = detail::total_steps(spec.maturity, cfg);
  const double dt = spec.maturity / static_cast<double>(steps);
  const detail::EulerCoef coef(params, dt);
  const double K = spec.strike;
  const bool is_call = spec.side == Side::Call;
  const auto payoff = [K, is_call](double terminal_price) noexcept {
    return is_call ? std::max(terminal_price - K, 0.0) : std::max(K - terminal_price, 0.0);
  };

  constexpr std::uint64_t block = 4096;  // reduction granularity, thread-independent
  const std::uint64_t units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
  const std::uint64_t n_blocks = (units + block - 1) / block;
  std::vector<double> sums(n_blocks, 0.0), sq_sums(n_blocks, 0.0);

  detail::parallel_ranges(n_blocks, [&](std::uint64_t bb, std::uint64_t be) {
    for (std::uint64_t b = bb; b < be; ++b) {
      double s = 0.0, s2 = 0.0;
      const std::uint64_t lo = b * block, hi = std::min(units, lo + block);
      for (std::uint64_t u = lo; u < hi; ++u) {
        double value;
        if (cfg.antithetic) {
          detail::Xoshiro256pp rng(cfg.seed, 2 * u);
          detail::NormalGen normal{rng};
          double ya = 0.0, yb = 0.0;
          for (std::uint64_t i = 0; i < steps; ++i) {
            const double z = normal();
            ya += ya >= 0.0 ? coef.drift_p + coef.vol_p * z : coef.drift_m + coef.vol_m * z;
            yb += yb >= 0.0 ? coef.drift_p - coef.vol_p * z : coef.drift_m - coef.vol_m * z;
          }
          value = 0.5 * (payoff(std::exp(ya)) + payoff(std::exp(yb)));
        } else if (cfg.scheme == Scheme::EulerPrice) {
          detail::Xoshiro256pp rng(cfg.seed, u);
          detail::NormalGen normal{rng};
          double y = 0.0;
          for (std::uint64_t i = 0; i < steps; ++i) {
            const double z = normal();
            y += y >= 0.0 ? coef.drift_p + coef.vol_p * z : coef.drift_m + coef.vol_m * z;
          }
          value = payoff(std::exp(y));
        } else {
          detail::Xoshiro256pp rng(cfg.seed, u);
          detail::NormalGen normal{rng};
          double x = 0.0;
          for (std::uint64_t i = 0; i < steps; ++i)
            detail::ie_step(x, nullptr, params, dt, coef.sqdt, rng, normal);
          value = payoff(s_of_x(x, params));
        }
        s += value;
        s2 += value * value;
      }
      sums[b] = s;
      sq_sums[b] = s2;
    }
  });

  double total = 0.0, total_sq = 0.0;
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    total += sums[b];
    total_sq += sq_sums[b];
  }
  const double n = static_cast<double>(units);
  const double mean = total / n;
  McPriceResult result;
  result.estimate = mean;
  if (units > 1) {
    const double var = std::max(0.0, (total_sq - n * mean * mean) / (n - 1.0));
    result.std_error = std::sqrt(var / n);
  } else {
    result.std_error = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

namespace detail {

/// Integrates f over [a, b] where either bound may be infinite, splitting at
/// the interface because several reference densities have a kink there.
template <typename F>
[[nodiscard]] inline double integrate_real_line(F&& f, double a, double b,
                                                const QuadSpec& qs) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const double pos_inf = std::numeric_limits<double>::infinity();
  if (a >= b) return 0.0;
  if (a < 0.0 && b > 0.0)
    return integrate_real_line(f, a, 0.0, qs) + integrate_real_line(f, 0.0, b, qs);
  if (a == neg_inf) {
    if (b == pos_inf)
      return integrate_real_line(f, a, 0.0, qs) + integrate_real_line(f, 0.0, b, qs);
    // reflect onto a right half-line
    return integrate_half_infinite([&](double s) { return f(2.0 * b - s); }, b, qs).value;
  }
  if (b == pos_inf) return integrate_half_infinite(f, a, qs).value;
  return integrate(f, a, b, qs).value;
}

[[nodiscard]] inline QuadSpec gof_quad() noexcept {
  QuadSpec qs;
  qs.rel_tol = 1e-9;
  qs.abs_tol = 1e-12;
  qs.max_subdivisions = 1024;
  return qs;
}

/// Bin probabilities of the terminal level X_T: the edge list is extended by
/// +-infinity and each cell mass is obtained by integrating the analytic
/// marginal density.
[[nodiscard]] inline std::vector<double> x_bin_probs(const std::vector<double>& edges,
                                                     double T,
                                                     const ModelParams& params) {
  const QuadSpec qs = gof_quad();
  const auto f = [&](double x) { return marginal_density(x, T, params); };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pr;
  pr.reserve(edges.size() + 1);
  pr.push_back(integrate_real_line(f, -inf, edges.front(), qs));
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    pr.push_back(integrate_real_line(f, edges[i], edges[i + 1], qs));
  pr.push_back(integrate_real_line(f, edges.back(), inf, qs));
  return pr;
}

/// Joint cell mass P(x in [xa, xb], l in [la, lb]) of (terminal level, local
/// time) when both regimes share one volatility.  In that case the pair law
/// is the classical drifted-Brownian/local-time joint density
///   f(x, l) = h(T, l + |x|) e^{mu x - mu^2 T / 2},   mu = -sigma / 2,
/// and the local-time integral collapses exactly:
///   Int_la^lb h(T, l + m) dl
///     = [e^{-(la+m)^2/(2T)} - e^{-(lb+m)^2/(2T)}] / sqrt(2 pi T).
[[nodiscard]] inline double degenerate_xl_cell(double xa, double xb, double la,
                                               double lb, double sigma, double T) {
  const double mu = -0.5 * sigma;
  const double tilt = -0.5 * mu * mu * T;
  // Each term keeps its full exponent fused: the Gaussian decay always
  // dominates the linear tilt, while the split form overflows in the tails.
  const auto g = [&](double x) {
    const double m = std::abs(x);
    const double base = mu * x + tilt;
    const double upper =
        std::isfinite(lb) ? std::exp(base - 0.5 * (lb + m) * (lb + m) / T) : 0.0;
    const double lower = std::exp(base - 0.5 * (la + m) * (la + m) / T);
    return (lower - upper) / std::sqrt(two_pi * T);
  };
  return integrate_real_line(g, xa, xb, gof_quad());
}

/// Bin probabilities of the pre-last-visit occupation time V, integrating the
/// analytic occupation density; the boundary cells carry inverse-square-root
/// endpoint behavior.
[[nodiscard]] inline std::vector<double> v_bin_probs(const std::vector<double>& edges,
                                                     double T,
                                                     const ModelParams& params) {
  const auto rho = [&](double vv) { return occupation_density(vv, T, params); };
  std::vector<double> pr;
  pr.reserve(edges.size() + 1);
  {
    QuadSpec qs = gof_quad();
    qs.left_singularity = Singularity::InvSqrt;
    pr.push_back(integrate(rho, 0.0, edges.front(), qs).value);
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    pr.push_back(integrate(rho, edges[i], edges[i + 1], gof_quad()).value);
  {
    QuadSpec qs = gof_quad();
    qs.right_singularity = Singularity::InvSqrt;
    pr.push_back(integrate(rho, edges.back(), T, qs).value);
  }
  return pr;
}

/// Chi-square test of observed counts against cell probabilities.  Cells are
/// first normalized, then low-expectation cells (below 5) are pooled — by
/// merging with the weaker neighbor for ordered 1-d cells, or into one
/// overflow cell for unordered layouts — and the upper tail of the
/// chi-square law with (cells - 1) degrees of freedom gives the p-value.
[[nodiscard]] inline GofResult chi_square_test(std::string name,
                                               std::vector<double> counts,
                                               std::vector<double> probs,
                                               double n_samples, bool ordered) {
  double mass = 0.0;
  for (double pb : probs) mass += pb;
  for (double& pb : probs) pb /= mass;

  if (ordered) {
    bool again = true;
    while (again && probs.size() > 2) {
      again = false;
      std::size_t worst = 0;
      for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] < probs[worst]) worst = i;
      if (n_samples * probs[worst] < 5.0) {
        std::size_t nb;
        if (worst == 0)
          nb = 1;
        else if (worst + 1 == probs.size())
          nb = worst - 1;
        else
          nb = probs[worst - 1] < probs[worst + 1] ? worst - 1 : worst + 1;
        const std::size_t keep = std::min(worst, nb), drop = std::max(worst, nb);
        probs[keep] += probs[drop];
        counts[keep] += counts[drop];
        probs.erase(probs.begin() + static_cast<std::ptrdiff_t>(drop));
        counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(drop));
        again = true;
      }
    }
  } else {
    std::vector<double> kept_p, kept_c;
    double pool_p = 0.0, pool_c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (n_samples * probs[i] < 5.0) {
        pool_p += probs[i];
        pool_c += counts[i];
      } else {
        kept_p.push_back(probs[i]);
        kept_c.push_back(counts[i]);
      }
    }
    if (pool_p > 0.0) {
      kept_p.push_back(pool_p);
      kept_c.push_back(pool_c);
    }
    probs = std::move(kept_p);
    counts = std::move(kept_c);
  }

  double stat = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double expected = n_samples * probs[i];
    const double d = counts[i] - expected;
    stat += d * d / expected;
  }
  GofResult r;
  r.name = std::move(name);
  r.statistic = stat;
  r.dof = probs.size() - 1;
  r.p_value = chi_square_tail(stat, static_cast<double>(r.dof));
  return r;
}

inline void check_edges(const std::vector<double>& edges, const char* which,
                        double lo_open, double hi_open) {
  if (edges.empty()) return;
  for (double e : edges)
    if (!std::isfinite(e))
      throw std::invalid_argument(std::string("functional_gof: ") + which +
                                  " edges must be finite");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1]))
      throw std::invalid_argument(std::string("functional_gof: ") + which +
                                  " edges must be strictly increasing");
  if (!(edges.front() > lo_open) || !(edges.back() < hi_open))
    throw std::invalid_argument(std::string("functional_gof: ") + which +
                                " edges must lie strictly inside the support");
}

/// Histogram of one sample field over cells delimited by edges (extended by
/// the support boundaries on both sides).
[[nodiscard]] inline std::vector<double> bin_counts(
    const std::vector<double>& edges, const std::vector<FunctionalSample>& samples,
    double FunctionalSample::* field) {
  std::vector<double> counts(edges.size() + 1, 0.0);
  for (const auto& s : samples) {
    const double value = s.*field;
    const std::size_t idx = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
    counts[idx] += 1.0;
  }
  return counts;
}

}  // namespace detail

/// Chi-square goodness-of-fit of simulated path functionals against the
/// analytic laws.  Enabled tests (see GofBinning):
///   "x_marginal"          terminal level vs the analytic marginal density,
///   "l_marginal"          interface local time vs the constant-volatility
///                         closed form (requires equal regime volatilities),
///   "occupation_marginal" pre-last-visit occupation vs the analytic
///                         occupation density,
///   "xl_joint"            joint (terminal, local time) cells vs the
///                         constant-volatility closed form.
/// Requires n_paths >= 1e5 so the asymptotic chi-square law applies to every
/// retained cell.
[[nodiscard]] inline std::vector<GofResult> functional_gof(const ModelParams& params,
                                                           double T,
                                                           const SimConfig& cfg,
                                                           const GofBinning& binning) {
  if (cfg.n_paths < 100000)
    throw std::invalid_argument("functional_gof: n_paths must be at least 100000");
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::domain_error("functional_gof: T must be positive and finite");
  const double inf = std::numeric_limits<double>::infinity();
  detail::check_edges(binning.x_edges, "x", -inf, inf);
  detail::check_edges(binning.l_edges, "l", 0.0, inf);
  detail::check_edges(binning.v_edges, "v", 0.0, T);
  const bool need_l = !binning.l_edges.empty() || binning.pair_xl;
  if (need_l && !params.degenerate())
    throw std::invalid_argument(
        "functional_gof: the local-time reference law is available only for "
        "equal regime volatilities");
  if (binning.pair_xl && (binning.x_edges.empty() || binning.l_edges.empty()))
    throw std::invalid_argument(
        "functional_gof: the joint test needs both x and l edges");
  if (binning.x_edges.empty() && binning.l_edges.empty() && binning.v_edges.empty())
    throw std::invalid_argument("functional_gof: no test enabled");

  const std::vector<FunctionalSample> samples = simulate(params, T, cfg);
  const double n = static_cast<double>(samples.size());
  std::vector<GofResult> results;

  if (!binning.x_edges.empty()) {
    results.push_back(detail::chi_square_test(
        "x_marginal", detail::bin_counts(binning.x_edges, samples, &FunctionalSample::x_T),
        detail::x_bin_probs(binning.x_edges, T, params), n, /*ordered=*/true));
  }
  if (!binning.l_edges.empty()) {
    std::vector<double> lo{0.0};
    lo.insert(lo.end(), binning.l_edges.begin(), binning.l_edges.end());
    std::vector<double> probs;
    probs.reserve(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double hi = i + 1 < lo.size() ? lo[i + 1] : inf;
      probs.push_back(
          detail::degenerate_xl_cell(-inf, inf, lo[i], hi, params.sigma_plus, T));
    }
    results.push_back(detail::chi_square_test(
        "l_marginal", detail::bin_counts(binning.l_edges, samples, &FunctionalSample::l_T),
        std::move(probs), n, /*ordered=*/true));
  }
  if (!binning.v_edges.empty()) {
    results.push_back(detail::chi_square_test(
        "occupation_marginal",
        detail::bin_counts(binning.v_edges, samples, &FunctionalSample::v),
        detail::v_bin_probs(binning.v_edges, T, params), n, /*ordered=*/true));
  }
  if (binning.pair_xl) {
    const std::size_t nx = binning.x_edges.size() + 1;
    const std::size_t nl = binning.l_edges.size() + 1;
    std::vector<double> counts(nx * nl, 0.0), probs(nx * nl, 0.0);
    for (const auto& s : samples) {
      const std::size_t ix = static_cast<std::size_t>(
          std::upper_bound(binning.x_edges.begin(), binning.x_edges.end(), s.x_T) -
          binning.x_edges.begin());
      const std::size_t il = static_cast<std::size_t>(
          std::upper_bound(binning.l_edges.begin(), binning.l_edges.end(), s.l_T) -
          binning.l_edges.begin());
      counts[ix * nl + il] += 1.0;
    }
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double xa = ix == 0 ? -inf : binning.x_edges[ix - 1];
      const double xb = ix == nx - 1 ? inf : binning.x_edges[ix];
      for (std::size_t il = 0; il < nl; ++il) {
        const double la = il == 0 ? 0.0 : binning.l_edges[il - 1];
        const double lb = il == nl - 1 ? inf : binning.l_edges[il];
        probs[ix * nl + il] =
            detail::degenerate_xl_cell(xa, xb, la, lb, params.sigma_plus, T);
      }
    }
    results.push_back(detail::chi_square_test("xl_joint", std::move(counts),
                                              std::move(probs), n, /*ordered=*/false));
  }
  return results;
}

inline constexpr std::uint64_t sample_schema_version = 1;

/// Writes samples as a binary column file: a header of two little-endian
/// 64-bit words (record count, schema version) followed by five contiguous
/// columns of little-endian IEEE-754 doubles in declaration order
/// (x_T, l_T, tau, tau0, v).
inline void write_samples(const std::string& path,
                          const std::vector<FunctionalSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_samples: cannot open " + path);
  const auto put_u64 = [&out](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(samples.size());
  put_u64(sample_schema_version);
  const double FunctionalSample::* columns[] = {
      &FunctionalSample::x_T, &FunctionalSample::l_T, &FunctionalSample::tau,
      &FunctionalSample::tau0, &FunctionalSample::v};
  for (const auto column : columns)
    for (const auto& s : samples) put_u64(std::bit_cast<std::uint64_t>(s.*column));
  if (!out) throw std::runtime_error("write_samples: write failed for " + path);
}

/// Reads a sample file produced by write_samples.  Throws std::runtime_error
/// on an unreadable, truncated, or unsupported file.
[[nodiscard]] inline std::vector<FunctionalSample> read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_samples: cannot open " + path);
  const auto get_u64 = [&in]() {
    unsigned char b[8] = {};
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  };
  const std::uint64_t count = get_u64();
  const std::uint64_t version = get_u64();
  if (!in) throw std::runtime_error("read_samples: truncated header in " + path);
  if (version != sample_schema_version)
    throw std::runtime_error("read_samples: unsupported schema version in " + path);
  std::vector<FunctionalSample> samples(count);
  double FunctionalSample::* columns[] = {
      &FunctionalSample::x_T, &FunctionalSample::l_T, &FunctionalSample::tau,
      &FunctionalSample::tau0, &FunctionalSample::v};
  for (const auto column : columns)
    for (auto& s : samples) s.*column = std::bit_cast<double>(get_u64());
  if (!in) throw std::runtime_error("read_samples: truncated data in " + path);
  return samples;
}

}  // namespace skewvol

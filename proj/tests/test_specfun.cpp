// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "skewvol/model.hpp"
#include "skewvol/quadrature.hpp"
#include "skewvol/specfun.hpp"

using namespace skewvol;

namespace {
const ModelParams ref = new_params(0.2, 0.9);
}

TEST_CASE("normal cdf reference values", "[specfun]") {
  CHECK(norm_cdf(0.0) == 0.5);
  CHECK(norm_cdf(40.0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(norm_cdf(0.1) == Catch::Approx(0.53982783727702898).margin(1e-15));
  double prev = -1.0;
  for (double z = -6.0; z <= 6.0; z += 0.25) {
    const double c = norm_cdf(z);
    CHECK(c > prev);
    CHECK(c + norm_cdf(-z) == Catch::Approx(1.0).margin(1e-15));
    prev = c;
  }
}

TEST_CASE("error function reference and symmetry", "[specfun]") {
  CHECK(skewvol::erf(0.0) == 0.0);
  CHECK(skewvol::erf(1.0) == Catch::Approx(0.84270079294971487).epsilon(1e-15));
  CHECK(skewvol::erf(-0.73) == Catch::Approx(-skewvol::erf(0.73)).epsilon(1e-15));
}

TEST_CASE("inverse error function round trips", "[specfun]") {
  CHECK(erf_inv(0.0) == 0.0);
  for (double y : {-0.999999999999, -0.97, -0.5, -1e-5, 1e-8, 0.3, 0.85, 0.99999,
                   1.0 - 1e-12}) {
    const double x = erf_inv(y);
    CHECK(skewvol::erf(x) == Catch::Approx(y).margin(1e-14));
  }
  // Small-argument expansion erf_inv(y) ~ (sqrt(pi)/2)(y + (pi/12) y^3).
  const double y = 1e-3;
  const double series =
      0.5 * std::sqrt(std::numbers::pi) * (y + std::numbers::pi / 12.0 * y * y * y);
  CHECK(erf_inv(y) == Catch::Approx(series).margin(1e-12));
  CHECK(erf_inv(y) == Catch::Approx(8.8622715746655210457e-4).epsilon(1e-12));
  CHECK_THROWS_AS(erf_inv(1.0), std::domain_error);
  CHECK_THROWS_AS(erf_inv(-1.0), std::domain_error);
  CHECK_THROWS_AS(erf_inv(1.5), std::domain_error);
}

TEST_CASE("first-passage density values", "[specfun]") {
  CHECK(fpt_density_h(1.0, 0.0) == 0.0);
  CHECK(fpt_density_h(1.0, 1.0) == Catch::Approx(0.24197072451914335).epsilon(1e-14));
  CHECK(fpt_density_h(0.25, -0.7) == Catch::Approx(0.83847380756017117).epsilon(1e-14));
  CHECK(fpt_density_h(2.0, 1.3) == fpt_density_h(2.0, -1.3));
  CHECK_THROWS_AS(fpt_density_h(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(fpt_density_h(-1.0, 1.0), std::domain_error);
}

TEST_CASE("first-passage density integrates to one", "[specfun]") {
  QuadSpec spec;
  spec.rel_tol = 1e-12;
  spec.abs_tol = 0.0;
  spec.max_subdivisions = 4096;
  for (double y : {0.1, 1.0, 5.0}) {
    const QuadResult r =
        integrate_half_infinite([y](double s) { return fpt_density_h(s, y); }, 0.0, spec);
    CHECK(r.value == Catch::Approx(1.0).margin(y == 1.0 ? 1e-10 : 1e-9));
  }
}

TEST_CASE("psi closed form against pinned values", "[specfun]") {
  CHECK(psi(0.1, 1.0, 0.0) == Catch::Approx(0.45319565395861922).epsilon(1e-13));
  CHECK(psi(0.3, 2.0, 1.1) == Catch::Approx(0.40873380823298298).epsilon(1e-13));
  CHECK(psi(-0.45, 0.7, -0.6) == Catch::Approx(0.66012614661497927).epsilon(1e-13));
  // a = 0 leaves only the Gaussian term.
  CHECK(psi(0.0, 1.0, 0.7) ==
        Catch::Approx(std::exp(-0.49 / 2.0) / sqrt_two_pi).margin(1e-14));
  CHECK_THROWS_AS(psi(0.1, 0.0, 0.0), std::domain_error);
}

TEST_CASE("psi threshold identity", "[specfun]") {
  // psi(a, s, 0) - psi(-a, s, 0) = a e^{a^2 s / 2}.
  const double a = 0.3, s = 2.0;
  const double lhs = psi(a, s, 0.0) - psi(-a, s, 0.0);
  CHECK(lhs == Catch::Approx(a * std::exp(a * a * s / 2.0)).margin(1e-13));
  // The two kink-side limits differ by the same amount: the defining integral
  // gains the full e^{a x} mass of the atom-free crossing.
  const double gap = psi(a, s, 0.0, KinkSide::Above) - psi(a, s, 0.0, KinkSide::Below);
  CHECK(gap == Catch::Approx(a * std::exp(a * a * s / 2.0)).margin(1e-13));
  // Below-side value is the k -> 0- limit.
  CHECK(psi(a, s, -1e-12, KinkSide::Above) ==
        Catch::Approx(psi(a, s, 0.0, KinkSide::Below)).epsilon(1e-10));
}

TEST_CASE("psi equals its defining integral", "[specfun]") {
  QuadSpec spec;
  spec.rel_tol = 1e-11;
  spec.abs_tol = 0.0;
  spec.max_subdivisions = 4096;
  for (double a : {-1.0, -0.3, 0.0, 0.45, 1.0}) {
    for (double s : {0.3, 0.9, 1.0, 2.0, 3.5}) {
      for (double k : {-1.3, -0.4, 0.0, 0.6, 1.8}) {
        const double want = psi(a, s, k);
        // e^{a x} h(s, x) written with a single exponent so the tilt factor
        // cannot overflow separately from the Gaussian underflowing.
        const double norm = std::sqrt(two_pi * s * s * s);
        QuadResult r;
        if (k >= 0.0) {
          r = integrate_half_infinite(
              [&](double x) { return x / norm * std::exp(a * x - x * x / (2.0 * s)); }, k,
              spec);
        } else {
          r = integrate_half_infinite(
              [&](double y) { return y / norm * std::exp(-a * y - y * y / (2.0 * s)); }, -k,
              spec);
        }
        INFO("a=" << a << " s=" << s << " k=" << k);
        CHECK(r.value == Catch::Approx(want).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("psi stays positive and finite over the stress region", "[specfun]") {
  for (double a : {-5.0, -2.0, -0.5, 0.5, 2.0, 5.0}) {
    for (double s : {1e-6, 1e-3, 0.1, 1.0, 10.0, 50.0}) {
      for (double k : {-10.0, -3.0, -0.1, 0.0, 0.1, 3.0, 10.0}) {
        const double v = psi(a, s, k);
        INFO("a=" << a << " s=" << s << " k=" << k << " v=" << v);
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        // The Gaussian term alone keeps the value away from zero whenever
        // its exponent is representable; beyond that the true value sits
        // below the smallest double and rounding to 0 is the best answer.
        if (a * k - k * k / (2.0 * s) > -700.0) CHECK(v > 0.0);
      }
    }
  }
}

TEST_CASE("phi reference values and symmetry", "[specfun]") {
  CHECK(phi(0.3, ref) == Catch::Approx(0.72348060896854175).epsilon(1e-13));
  CHECK(phi(0.5, ref) == Catch::Approx(0.55790985965199352).epsilon(1e-13));
  CHECK(phi(1.0, ref) == Catch::Approx(0.3901548220254663).epsilon(1e-13));
  CHECK(phi(3.0, ref) == Catch::Approx(0.2157247896513422).epsilon(1e-13));
  const ModelParams swapped = new_params(0.9, 0.2);
  CHECK(phi(0.5, swapped) == Catch::Approx(phi(0.5, ref)).epsilon(1e-14));
  CHECK_THROWS_AS(phi(0.0, ref), std::domain_error);
  CHECK_THROWS_AS(phi(-1.0, ref), std::domain_error);
}

TEST_CASE("phi small-time expansion", "[specfun]") {
  // phi(t) - 1/sqrt(2 pi t) = -(sigma_plus sigma_minus / (8 sqrt(2 pi))) sqrt(t) (1 + o(1)).
  const double t = 1e-6;
  const double resid = (phi(t, ref) - 1.0 / std::sqrt(two_pi * t)) / std::sqrt(t);
  const double coeff = -ref.sigma_plus * ref.sigma_minus / (8.0 * sqrt_two_pi);
  CHECK(coeff == Catch::Approx(-0.0089762013090322353).epsilon(1e-13));
  CHECK(resid == Catch::Approx(coeff).epsilon(1e-4));
  CHECK(resid == Catch::Approx(-0.0089762011164179194).epsilon(1e-6));
}

TEST_CASE("phi degenerate branch agrees with the closed form", "[specfun]") {
  // Exactly equal volatilities: the known limit e^{-sigma^2 t / 8} / sqrt(2 pi t).
  const ModelParams flat = new_params(0.3, 0.3);
  const double limit = std::exp(-0.09 / 8.0) / std::sqrt(two_pi);
  CHECK(phi(1.0, flat) == Catch::Approx(limit).epsilon(1e-14));
  // One-sided perturbation evaluated with the exact formula.
  const ModelParams nearby = new_params(0.3 * (1.0 + 1e-7), 0.3);
  PhiEvalMode exact;
  exact.mode = PhiEvalMode::Mode::Exact;
  CHECK(phi(1.0, nearby, exact) == Catch::Approx(phi(1.0, flat)).margin(1e-9));
}

TEST_CASE("phi branch continuity across the switch band", "[specfun]") {
  PhiEvalMode exact;
  exact.mode = PhiEvalMode::Mode::Exact;
  for (double gap : {1e-7, 5e-7, 9e-7}) {
    const ModelParams m = new_params(0.3 * (1.0 + gap), 0.3);
    for (double t : {0.1, 1.0, 4.0}) {
      const double series = phi(t, m);          // default mode switches to the series here
      const double closed = phi(t, m, exact);   // forced closed form
      INFO("gap=" << gap << " t=" << t);
      CHECK(series == Catch::Approx(closed).epsilon(1e-8));
    }
  }
}

TEST_CASE("phi mode validation", "[specfun]") {
  PhiEvalMode bad;
  bad.threshold = 0.0;
  CHECK_THROWS_AS(phi(1.0, ref, bad), std::invalid_argument);
  bad.threshold = 2e-3;
  CHECK_THROWS_AS(phi(1.0, ref, bad), std::invalid_argument);
}

TEST_CASE("phi integral closed form", "[specfun]") {
  CHECK(phi_integral(0.0, ref) == 0.0);
  CHECK(phi_integral(0.5, ref) == Catch::Approx(0.56208739365443348).epsilon(1e-13));
  CHECK(phi_integral(1.0, ref) == Catch::Approx(0.79197636180181989).epsilon(1e-13));
  CHECK_THROWS_AS(phi_integral(-0.1, ref), std::domain_error);
  // Monotone increasing in T.
  double prev = 0.0;
  for (double T = 0.05; T < 8.0; T *= 1.4) {
    const double cur = phi_integral(T, ref);
    CHECK(cur > prev);
    prev = cur;
  }
  // Degenerate closed form (2 / sigma) Erf(sigma sqrt(T) / sqrt(8)).
  const ModelParams flat = new_params(0.3, 0.3);
  CHECK(phi_integral(1.0, flat) ==
        Catch::Approx(2.0 / 0.3 * std::erf(0.3 / std::sqrt(8.0))).epsilon(1e-14));
}

TEST_CASE("phi integral matches adaptive quadrature of phi", "[specfun]") {
  QuadSpec spec;
  spec.rel_tol = 1e-12;
  spec.abs_tol = 0.0;
  spec.max_subdivisions = 1024;
  spec.left_singularity = Singularity::InvSqrt;  // phi(s) ~ s^{-1/2} at the origin
  const QuadResult r = integrate([&](double s) { return phi(s, ref); }, 0.0, 1.0, spec);
  REQUIRE(r.converged);
  CHECK(r.value == Catch::Approx(phi_integral(1.0, ref)).margin(1e-9));
}

TEST_CASE("phi integral ATM consistency", "[specfun]") {
  // (sigma_minus sigma_plus / (sigma_minus + sigma_plus)) * phi_integral(T)
  // is the ATM option price.
  const double scale = ref.sigma_minus * ref.sigma_plus / (ref.sigma_minus + ref.sigma_plus);
  CHECK(scale * phi_integral(0.5, ref) ==
        Catch::Approx(0.091977937143452751).epsilon(1e-12));
}

TEST_CASE("chi-square tail helper", "[specfun]") {
  CHECK(detail::chi_square_tail(3.841458820694124, 1.0) == Catch::Approx(0.05).margin(1e-9));
  CHECK(detail::chi_square_tail(9.0, 9.0) == Catch::Approx(0.43727418891386693).margin(1e-9));
  CHECK(detail::chi_square_tail(2.0, 7.0) == Catch::Approx(0.9598403687301016).margin(1e-9));
  CHECK(detail::gamma_p(1.0, 2.5) == Catch::Approx(0.9179150013761012).margin(1e-12));
  CHECK(detail::chi_square_tail(0.0, 5.0) == 1.0);
}

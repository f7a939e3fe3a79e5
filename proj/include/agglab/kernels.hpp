#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "agglab/quadrature.hpp"

// Sphere-averaged interaction kernels for the radially symmetric aggregation
// equation with K(x) = |x|^alpha.  Everything here reduces to one-dimensional
// integrals over the polar angle:
//
//   psi(rho) = (w_{d-1}/w_d) int_0^pi (1 - rho cos t) (sin t)^{d-2} A^{alpha-2} dt
//   A(rho,t) = sqrt(1 + rho^2 - 2 rho cos t)
//
// psi(rho) is the radial component of the field generated at unit radius by a
// unit sphere of radius rho.  phi(r) is its alpha = 1 specialization indexed
// the other way around, phi(r) = psi(1/r) for r > 0.

namespace agglab {

struct KernelParams {
  int d;
  double alpha;

  KernelParams(int dim, double a) : d(dim), alpha(a) {
    if (d < 2) throw std::domain_error("d must be an integer >= 2");
    if (!std::isfinite(alpha) || !(alpha > 2.0 - d))
      throw std::domain_error("alpha must be greater than 2 - d");
  }

  // Range in which the dynamics modules operate (strictly attractive kernel).
  bool attractive() const { return alpha > 0.0 && alpha < 2.0; }
};

// Surface measure of the unit sphere in R^d, via the exact half-integer
// recursion w_d = 2 pi w_{d-2} / (d - 2) instead of lgamma roundoff.
inline double unit_sphere_area(int d) {
  if (d < 1) throw std::domain_error("d must be an integer >= 1");
  constexpr double two_pi = 6.283185307179586476925286766559;
  double w = (d % 2 == 1) ? 2.0 : two_pi;
  for (int n = (d % 2 == 1) ? 1 : 2; n + 2 <= d; n += 2) w *= two_pi / n;
  return w;
}

// lim_{rho->inf} psi(rho) rho^{2-alpha} = (d + alpha - 2) / d.
inline double asymptotic_constant(const KernelParams& p) {
  return (p.d + p.alpha - 2.0) / p.d;
}

namespace detail {

inline double ipow(double x, int n) {
  double r = 1.0;
  for (; n > 0; n >>= 1, x *= x)
    if (n & 1) r *= x;
  return r;
}

inline void check_rho(double rho, const char* name) {
  if (!std::isfinite(rho) || rho < 0.0)
    throw std::domain_error(std::string(name) + " must be a finite value >= 0");
}

// A^2 rearranged as (1-rho)^2 + 4 rho sin^2(t/2): exact and free of the
// catastrophic cancellation the textbook form suffers near (rho, t) = (1, 0).
inline double a_squared(double rho, double half_sin_sq) {
  return (1.0 - rho) * (1.0 - rho) + 4.0 * rho * half_sin_sq;
}

inline std::vector<double> corner_breakpoints(double rho) {
  // The integrand loses smoothness where A -> 0, i.e. t comparable to |1-rho|.
  // Seeding a panel edge at that scale keeps the adaptive refinement local.
  std::vector<double> bp;
  const double c = std::fabs(1.0 - rho);
  if (rho > 0.25 && rho < 4.0 && c > 0.0 && c < 1.5) bp.push_back(c);
  bp.push_back(1.5707963267948966);  // pi/2, cheap insurance for the generic case
  return bp;
}

constexpr double kPi = 3.141592653589793238462643383280;

}  // namespace detail

// Sphere average psi(rho); positive, equal to 1 at rho = 0, strictly
// decreasing for alpha < 2, with tail (d+alpha-2)/d * rho^{alpha-2}.
inline double psi(double rho, const KernelParams& p,
                  const QuadratureConfig& cfg = {}) {
  detail::check_rho(rho, "rho");
  if (rho > cfg.asymptotic_switch)
    return asymptotic_constant(p) * std::pow(rho, p.alpha - 2.0);

  const double norm = unit_sphere_area(p.d - 1) / unit_sphere_area(p.d);
  const double expo = 0.5 * p.alpha - 1.0;
  auto f = [&](double t) {
    const double s = std::sin(0.5 * t);
    const double hss = s * s;
    const double num = (1.0 - rho) + 2.0 * rho * hss;  // = 1 - rho cos t
    return num * detail::ipow(std::sin(t), p.d - 2) *
           std::pow(detail::a_squared(rho, hss), expo);
  };
  return norm * integrate(f, 0.0, detail::kPi, cfg, detail::corner_breakpoints(rho));
}

// d/drho psi(rho) through the integrated-by-parts form
//   psi'(rho) = w_{d-1} (alpha-2)(d+alpha-2) / (w_d (d-1))
//               * int_0^pi rho (sin t)^d A^{alpha-4} dt,
// which is valid away from rho = 1 always, and at rho = 1 only when the
// integrand stays integrable there (d + alpha > 3).
inline double psi_prime(double rho, const KernelParams& p,
                        const QuadratureConfig& cfg = {}) {
  detail::check_rho(rho, "rho");
  if (rho == 1.0 && p.d + p.alpha <= 3.0)
    throw std::domain_error(
        "psi_prime is not integrable at rho = 1 when d + alpha <= 3");
  if (rho > cfg.asymptotic_switch)
    return asymptotic_constant(p) * (p.alpha - 2.0) * std::pow(rho, p.alpha - 3.0);

  const double coef = unit_sphere_area(p.d - 1) * (p.alpha - 2.0) *
                      (p.d + p.alpha - 2.0) /
                      (unit_sphere_area(p.d) * (p.d - 1));
  const double expo = 0.5 * p.alpha - 2.0;
  auto f = [&](double t) {
    const double s = std::sin(0.5 * t);
    return rho * detail::ipow(std::sin(t), p.d) *
           std::pow(detail::a_squared(rho, s * s), expo);
  };
  return coef * integrate(f, 0.0, detail::kPi, cfg, detail::corner_breakpoints(rho));
}

// alpha = 1 kernel in outward form: phi(r) = (w_{d-1}/w_d)
// int_0^pi (r - cos t)(sin t)^{d-2} / A dt, so phi(r) = psi(1/r) for r > 0.
inline double phi(double r, int d, const QuadratureConfig& cfg = {}) {
  if (d < 2) throw std::domain_error("d must be an integer >= 2");
  detail::check_rho(r, "r");
  if (r > cfg.asymptotic_switch) {
    // phi(r) = 1 - (d-1)/(2d) r^{-2} + O(r^{-4}); avoids overflow in (1-r)^2.
    const double r2 = 1.0 / (r * r);
    return 1.0 - 0.5 * (d - 1.0) / d * r2;
  }
  const double norm = unit_sphere_area(d - 1) / unit_sphere_area(d);
  auto f = [&](double t) {
    const double s = std::sin(0.5 * t);
    const double hss = s * s;
    const double num = (r - 1.0) + 2.0 * hss;  // = r - cos t
    return num * detail::ipow(std::sin(t), d - 2) /
           std::sqrt(detail::a_squared(r, hss));
  };
  return norm * integrate(f, 0.0, detail::kPi, cfg, detail::corner_breakpoints(r));
}

// First and second derivative of phi.  The defining integrals are
//   phi'(r)  =  (w_{d-1}/w_d) int (sin t)^d A^{-3} dt
//   phi''(r) = -3 (w_{d-1}/w_d) int (sin t)^d (r - cos t) A^{-5} dt
// and both lose integrability at r = 1 in low dimension; those combinations
// are refused rather than silently mis-evaluated.
inline double phi_derivative(double r, int d, int order,
                             const QuadratureConfig& cfg = {}) {
  if (d < 2) throw std::domain_error("d must be an integer >= 2");
  if (order != 1 && order != 2)
    throw std::invalid_argument("order must be 1 or 2");
  detail::check_rho(r, "r");
  if (order == 1) {
    if (d == 2 && r == 1.0)
      throw std::domain_error("phi'(1) diverges in d = 2");
  } else {
    if (r == 0.0)
      throw std::domain_error("phi'' requires r > 0");
    if (d <= 3 && r == 1.0)
      throw std::domain_error("phi'' is not defined at r = 1 for d <= 3");
  }
  if (r > cfg.asymptotic_switch) {
    const double c = (d - 1.0) / d;
    return order == 1 ? c / (r * r * r) : -3.0 * c / (r * r * r * r);
  }

  const double norm = unit_sphere_area(d - 1) / unit_sphere_area(d);
  if (order == 1) {
    auto f = [&](double t) {
      const double s = std::sin(0.5 * t);
      const double a2 = detail::a_squared(r, s * s);
      return detail::ipow(std::sin(t), d) / (a2 * std::sqrt(a2));
    };
    return norm * integrate(f, 0.0, detail::kPi, cfg, detail::corner_breakpoints(r));
  }
  auto f = [&](double t) {
    const double s = std::sin(0.5 * t);
    const double hss = s * s;
    const double a2 = detail::a_squared(r, hss);
    const double num = (r - 1.0) + 2.0 * hss;
    return detail::ipow(std::sin(t), d) * num / (a2 * a2 * std::sqrt(a2));
  };
  return -3.0 * norm *
         integrate(f, 0.0, detail::kPi, cfg, detail::corner_breakpoints(r));
}

// Exact d = 3 profile: linear core, then 1 - 1/(3 r^2).
inline double phi_closed_form_d3(double r) {
  detail::check_rho(r, "r");
  if (r <= 1.0) return 2.0 * r / 3.0;
  return 1.0 - 1.0 / (3.0 * r * r);
}

}  // namespace agglab

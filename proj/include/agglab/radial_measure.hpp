#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "agglab/kernels.hpp"
#include "agglab/quadrature.hpp"

// Radially symmetric measures as a point mass at the origin plus finitely
// many spherical shells ("rings"), and the singular initial profiles the
// dynamics are run from.  All profiles are supported in |x| <= 1/2 and
// normalized to total mass 1.

namespace agglab {

// Requested when an operation needs an absolutely continuous density but the
// measure already carries an atom at the origin.
class no_density_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Ring {
  double mass;
  double radius;
};

struct RadialMeasure {
  double origin_mass = 0.0;
  std::vector<Ring> rings;  // strictly increasing radii

  double total_mass() const {
    double s = origin_mass;
    for (const Ring& r : rings) s += r.mass;
    return s;
  }

  void validate() const {
    if (!(origin_mass >= 0.0))
      throw std::invalid_argument("origin_mass must be >= 0");
    double prev = 0.0;
    for (const Ring& r : rings) {
      if (!(r.mass > 0.0)) throw std::invalid_argument("ring masses must be > 0");
      if (!(r.radius > prev))
        throw std::invalid_argument("ring radii must be positive and strictly increasing");
      prev = r.radius;
    }
  }
};

// Closed-ball mass: origin atom plus every ring with radius <= r.
// Right-continuous in r by construction.
inline double mass_in_ball(const RadialMeasure& m, double r) {
  if (!(r >= 0.0)) throw std::domain_error("r must be >= 0");
  double s = m.origin_mass;
  for (const Ring& ring : m.rings) {
    if (ring.radius > r) break;
    s += ring.mass;
  }
  return s;
}

inline double second_moment(const RadialMeasure& m) {
  double s = 0.0;
  for (const Ring& r : m.rings) s += r.mass * r.radius * r.radius;
  return s;
}

// L_p norm of the piecewise-constant density that spreads each ring's mass
// over the shell bounded by the midpoints to its neighbours (innermost shell
// reaches down to 0, outermost extends symmetrically past the last ring).
inline double lp_norm_estimate(const RadialMeasure& m, double p, int d) {
  if (d < 1) throw std::domain_error("d must be an integer >= 1");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::domain_error("p must be a finite value >= 1");
  if (m.origin_mass > 0.0)
    throw no_density_error(
        "measure has an atom at the origin; no density exists");
  const std::size_t n = m.rings.size();
  if (n < 2)
    throw std::invalid_argument("density reconstruction needs at least 2 rings");

  std::vector<double> b(n + 1);
  b[0] = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    b[i + 1] = 0.5 * (m.rings[i].radius + m.rings[i + 1].radius);
  b[n] = 2.0 * m.rings[n - 1].radius - b[n - 1];

  const double ball = unit_sphere_area(d) / d;  // volume of the unit ball
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double vol =
        ball * (std::pow(b[i + 1], d) - std::pow(b[i], d));
    const double u = m.rings[i].mass / vol;
    acc += std::pow(u, p) * vol;
  }
  return std::pow(acc, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Initial profiles

enum class InitialDataKind {
  log_critical_alpha1,  // L / (|x|^{d-1} (-log|x|)^k), alpha = 1
  power_law,            // L / |x|^{d+alpha-2+eps}
  log_critical_general  // L / (|x|^{d+alpha-2} (-log|x|)^k)
};

inline const char* to_string(InitialDataKind k) {
  switch (k) {
    case InitialDataKind::log_critical_alpha1: return "log_critical_alpha1";
    case InitialDataKind::power_law: return "power_law";
    case InitialDataKind::log_critical_general: return "log_critical_general";
  }
  return "?";
}

struct InitialDataSpec {
  InitialDataKind kind = InitialDataKind::power_law;
  int d = 3;
  double alpha = 1.0;
  double k = std::numeric_limits<double>::quiet_NaN();        // log kinds
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // power_law
};

namespace detail {

// Radial mass density written in s = -log(rho):
//   dm = L w_d rho^{1-alpha-eps?} (-log rho)^{-k?} drho
//      = L w_d exp(-beta s) s^{-k?} ds,   beta = 2 - alpha (- eps for power law).
// Integrating in s is stable down to arbitrarily deep shells.
struct LogProfile {
  double beta;    // decay rate in s
  double k;       // log-weight exponent (0 for power_law)
  double s_max;   // truncation with tail below 1e-19 absolute

  double weight(double s) const {
    return k == 0.0 ? std::exp(-beta * s) : std::exp(-beta * s) * std::pow(s, -k);
  }
};

inline LogProfile log_profile(const InitialDataSpec& spec) {
  LogProfile p{};
  p.beta = 2.0 - spec.alpha;
  p.k = 0.0;
  if (spec.kind == InitialDataKind::power_law) {
    p.beta -= spec.epsilon;
  } else {
    p.k = spec.k;
  }
  // tail int_S^inf e^{-beta s} s^{-k} ds <= e^{-beta S} / beta for S >= 1
  p.s_max = (44.0 + std::max(0.0, -std::log(p.beta))) / p.beta;
  p.s_max = std::max(p.s_max, 1.0);
  return p;
}

constexpr double kLog2 = 0.69314718055994530941723212145818;  // -log(1/2)

}  // namespace detail

// Analytic handle on one of the singular profiles: the normalization constant
// L (the coefficient of the density once total mass is scaled to 1), the
// critical integrability exponent p_s = d/(d+alpha-2), and mass integrals.
struct InitialData {
  InitialDataSpec spec;
  double L = 0.0;
  double p_s = 0.0;

  // Pointwise density u0(|x|) on 0 < rho; zero outside the support.
  double density(double rho) const {
    if (!(rho > 0.0)) throw std::domain_error("density requires rho > 0");
    if (rho > 0.5) return 0.0;
    const double s = -std::log(rho);
    switch (spec.kind) {
      case InitialDataKind::log_critical_alpha1:
        return L / (std::pow(rho, spec.d - 1.0) * std::pow(s, spec.k));
      case InitialDataKind::power_law:
        return L / std::pow(rho, spec.d + spec.alpha - 2.0 + spec.epsilon);
      case InitialDataKind::log_critical_general:
        return L / (std::pow(rho, spec.d + spec.alpha - 2.0) * std::pow(s, spec.k));
    }
    return 0.0;
  }

  double radial_mass_density(double rho) const {
    return unit_sphere_area(spec.d) * std::pow(rho, spec.d - 1.0) * density(rho);
  }

  // Mass carried by radii in (a, b], integrated in s = -log rho.
  double mass_between(double a, double b, const QuadratureConfig& cfg = {}) const {
    if (!(a >= 0.0 && b >= a)) throw std::domain_error("need 0 <= a <= b");
    b = std::min(b, 0.5);
    if (b <= a) return 0.0;
    const auto prof = detail::log_profile(spec);
    const double s_hi = (a == 0.0) ? prof.s_max : std::min(-std::log(a), prof.s_max);
    const double s_lo = -std::log(b);
    if (s_lo >= s_hi) return 0.0;
    const double raw = integrate([&](double s) { return prof.weight(s); },
                                 s_lo, s_hi, cfg);
    return L * unit_sphere_area(spec.d) * raw;
  }

  double mass_in_ball(double r, const QuadratureConfig& cfg = {}) const {
    return mass_between(0.0, r, cfg);
  }

  // Mass-weighted mean radius of the shell (a, b]: int rho dm / int dm.
  double radius_centroid(double a, double b, const QuadratureConfig& cfg = {}) const {
    const double mass = mass_between(a, b, cfg);
    if (!(mass > 0.0))
      throw std::domain_error("radius_centroid needs a shell of positive mass");
    const auto prof = detail::log_profile(spec);
    b = std::min(b, 0.5);
    const double s_hi = (a == 0.0) ? prof.s_max : std::min(-std::log(a), prof.s_max);
    const double s_lo = -std::log(b);
    const double raw = integrate(
        [&](double s) { return std::exp(-s) * prof.weight(s); }, s_lo, s_hi, cfg);
    return L * unit_sphere_area(spec.d) * raw / mass;
  }
};

inline InitialData make_initial_data(const InitialDataSpec& spec,
                                     const QuadratureConfig& cfg = {}) {
  KernelParams params(spec.d, spec.alpha);  // validates d and the lower alpha bound
  if (!params.attractive())
    throw std::domain_error("alpha must lie in (0, 2)");

  switch (spec.kind) {
    case InitialDataKind::log_critical_alpha1: {
      if (spec.alpha != 1.0)
        throw std::domain_error("log_critical_alpha1 requires alpha = 1");
      const double lo = (spec.d - 1.0) / spec.d;
      if (!(spec.k > lo && spec.k < 1.0))
        throw std::domain_error("k must lie in ((d-1)/d, 1)");
      break;
    }
    case InitialDataKind::power_law: {
      if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0))
        throw std::domain_error("epsilon must lie in (0, 1)");
      if (!(spec.alpha + spec.epsilon < 2.0))
        throw std::domain_error(
            "alpha + epsilon must be < 2 for an integrable power_law profile");
      break;
    }
    case InitialDataKind::log_critical_general: {
      const double lo = (spec.d + spec.alpha - 2.0) / spec.d;  // = 1/p_s
      if (!(spec.k > lo && spec.k < 1.0))
        throw std::domain_error("k must lie in (1/p_s, 1) with p_s = d/(d+alpha-2)");
      break;
    }
  }

  InitialData data;
  data.spec = spec;
  data.p_s = spec.d / (spec.d + spec.alpha - 2.0);
  // Normalize so the profile is a probability measure: L = 1 / integral of
  // the bare power/log profile over the ball of radius 1/2.
  const auto prof = detail::log_profile(spec);
  const double raw = integrate([&](double s) { return prof.weight(s); },
                               detail::kLog2, prof.s_max, cfg);
  data.L = 1.0 / (unit_sphere_area(spec.d) * raw);
  return data;
}

// ---------------------------------------------------------------------------
// Discretization

struct GridSpec {
  int n_rings = 100;
  double r_min = 1e-6;
  double r_max = 0.5;
  enum class Spacing { geometric, uniform } spacing = Spacing::geometric;
};

// Partition (0, r_max] into n shells with boundaries r_min..r_max (mass below
// r_min folds into the innermost shell), one ring per shell at the shell's
// mass centroid carrying the exact shell mass.  The ring masses are rescaled
// at the end so they sum to 1 to machine precision.
inline RadialMeasure discretize(const InitialData& data, const GridSpec& grid,
                                const QuadratureConfig& cfg = {}) {
  if (grid.n_rings < 1) throw std::invalid_argument("n_rings must be >= 1");
  if (!(grid.r_min > 0.0 && grid.r_min < grid.r_max && grid.r_max <= 0.5))
    throw std::invalid_argument("grid bounds must satisfy 0 < r_min < r_max <= 1/2");

  const int n = grid.n_rings;
  std::vector<double> b(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    b[i] = grid.spacing == GridSpec::Spacing::geometric
               ? grid.r_min * std::pow(grid.r_max / grid.r_min, f)
               : grid.r_min + (grid.r_max - grid.r_min) * f;
  }
  b[n] = grid.r_max;

  RadialMeasure m;
  m.rings.reserve(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = (i == 0) ? 0.0 : b[i];
    const double mass = data.mass_between(lo, b[i + 1], cfg);
    if (!(mass > 0.0))
      throw std::runtime_error("grid produced a shell with non-positive mass");
    m.rings.push_back({mass, data.radius_centroid(lo, b[i + 1], cfg)});
    total += mass;
  }
  for (Ring& r : m.rings) r.mass /= total;
  m.validate();
  return m;
}

}  // namespace agglab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agglab/flow.hpp"
#include "agglab/kernels.hpp"
#include "agglab/radial_measure.hpp"

// Executable diagnostics on top of the dynamics: an independent N-body Monte
// Carlo check of the velocity reduction, empirical constants for the
// velocity lower bounds, collapse-time scaling, the critical-ratio curve
// whose growth witnesses mass concentration, and the similarity-solution
// machinery for linear-in-time collapse profiles.

namespace agglab {

namespace detail {

inline std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    out.push_back(lo * std::pow(hi / lo, f));
  }
  return out;
}

// Self-contained Gaussian/sphere sampler on top of mt19937_64 so that a
// seed pins the exact sample sequence on every platform (the standard
// library's distributions are implementation-defined).
class SphereSampler {
 public:
  explicit SphereSampler(std::uint64_t seed) : gen_(seed) {}

  // Uniform direction on the unit sphere in R^d via normalized Gaussians.
  void direction(int d, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(d));
    for (;;) {
      double norm2 = 0.0;
      for (double& c : out) {
        c = normal();
        norm2 += c * c;
      }
      if (norm2 > 1e-16) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& c : out) c *= inv;
        return;
      }
    }
  }

 private:
  double uniform_open() {  // (0, 1), both endpoints excluded
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, explicit for reproducibility
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    have_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

struct OracleEstimate {
  double estimate;
  double std_error;
};

// Monte Carlo estimate of the radial component of -grad K * mu at x = r e1,
// by direct pairwise summation: each ring is sampled uniformly on its
// sphere, and -alpha |x-y|^{alpha-2} (x-y).e1 is averaged.  Independent of
// the sphere-averaged kernels on purpose: no psi/phi anywhere in here.  The
// origin atom contributes its exact term (zero variance).  Ring j draws from
// its own seeded substream, so estimates are reproducible and insensitive to
// ring order.
inline OracleEstimate nbody_oracle_velocity(const RadialMeasure& m, double r,
                                            const KernelParams& params,
                                            long long n_samples,
                                            std::uint64_t seed) {
  if (!(r > 0.0)) throw std::domain_error("r must be > 0");
  if (n_samples < 1000)
    throw std::domain_error("n_samples must be an integer >= 1000");
  m.validate();

  const int d = params.d;
  const double alpha = params.alpha;
  double estimate = -alpha * std::pow(r, alpha - 1.0) * m.origin_mass;
  double variance = 0.0;

  std::vector<double> g;
  for (std::size_t j = 0; j < m.rings.size(); ++j) {
    detail::SphereSampler sampler(seed +
                                  0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(j) + 1));
    const double rho = m.rings[j].radius;
    double mean = 0.0, m2 = 0.0;
    for (long long k = 0; k < n_samples; ++k) {
      double s;
      int attempts = 0;
      for (;;) {
        sampler.direction(d, g);
        const double dx1 = r - rho * g[0];
        double a2 = dx1 * dx1;
        for (int c = 1; c < d; ++c) a2 += rho * g[c] * rho * g[c];
        const double a = std::sqrt(a2);
        if (a > 1e-14) {
          s = -alpha * std::pow(a, alpha - 2.0) * dx1;
          break;
        }
        if (++attempts > 100)
          throw std::runtime_error("sphere sampler stalled at the evaluation point");
      }
      const double delta = s - mean;
      mean += delta / static_cast<double>(k + 1);
      m2 += delta * (s - mean);
    }
    const double var = n_samples > 1 ? m2 / static_cast<double>(n_samples - 1) : 0.0;
    estimate += m.rings[j].mass * mean;
    variance += m.rings[j].mass * m.rings[j].mass * var /
                static_cast<double>(n_samples);
  }
  return {estimate, std::sqrt(variance)};
}

// ---------------------------------------------------------------------------
// Velocity lower bounds

struct BoundFitReport {
  InitialDataKind kind;       // selects the comparison function
  double empirical_delta1;    // inf over the grid of |v0(r)| / comparison(r)
  std::vector<double> grid;   // probe radii, ascending
  std::vector<double> ratios; // |v0(r)| / comparison(r) per probe
  double min_ratio_location;
};

// The comparison function each profile's velocity is bounded below by:
// r (-log r)^{1-k} for the log-critical profiles, r^{1-eps} for power laws.
inline double lower_bound_comparison(const InitialDataSpec& spec, double r) {
  if (spec.kind == InitialDataKind::power_law)
    return std::pow(r, 1.0 - spec.epsilon);
  return r * std::pow(-std::log(r), 1.0 - spec.k);
}

// Empirical constant for the initial-velocity lower bound: discretize the
// profile finely, evaluate |v0| at the probe radii, divide by the comparison
// function, and report the infimum (the bound asserts a positive constant
// exists; the infimum over the probed range is the honest estimate).
inline BoundFitReport fit_lower_bound(const InitialData& data,
                                      std::vector<double> grid,
                                      int n_rings = 4000,
                                      const QuadratureConfig& q = {}) {
  if (grid.empty()) throw std::invalid_argument("probe grid must be non-empty");
  std::sort(grid.begin(), grid.end());
  if (!(grid.front() > 0.0 && grid.back() < 0.5))
    throw std::invalid_argument("probe radii must lie in (0, 1/2)");

  KernelParams params(data.spec.d, data.spec.alpha);
  GridSpec fine;
  fine.n_rings = n_rings;
  fine.r_min = std::min(grid.front() * 1e-2, 1e-4);
  fine.r_max = 0.5;
  const RadialMeasure m0 = discretize(data, fine, q);

  BoundFitReport report;
  report.kind = data.spec.kind;
  report.grid = grid;
  report.empirical_delta1 = std::numeric_limits<double>::infinity();
  report.min_ratio_location = grid.front();
  for (double r : grid) {
    const double v = radial_velocity(m0, r, params, q);
    const double ratio = -v / lower_bound_comparison(data.spec, r);
    report.ratios.push_back(ratio);
    if (ratio < report.empirical_delta1) {
      report.empirical_delta1 = ratio;
      report.min_ratio_location = r;
    }
  }
  if (!(report.empirical_delta1 > 0.0))
    throw std::runtime_error(
        "velocity lower-bound ratio is not positive; refine the discretization");
  return report;
}

// ---------------------------------------------------------------------------
// Collapse-time scaling

struct CollapseSample {
  double r0;           // requested label
  double label;        // nearest actual ring label
  double absorb_time;  // NaN when censored
  bool censored;
};

struct CollapseScalingReport {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double time_cap = 0.0;
  std::vector<CollapseSample> samples;
};

// Run one integration of power-law data and read off the absorption time of
// the ring labeled nearest each requested r0; the log-log slope of absorb
// time against r0 estimates the collapse exponent.  Rings still alive at the
// time cap (10x the predicted outermost collapse, using the empirical bound
// constant) are reported censored and excluded from the fit.
inline CollapseScalingReport collapse_scaling(const InitialData& data,
                                              const std::vector<double>& r0_list,
                                              const GridSpec& grid,
                                              const SimConfig& sim) {
  if (data.spec.kind != InitialDataKind::power_law)
    throw std::domain_error("collapse_scaling requires power_law initial data");
  if (r0_list.size() < 2)
    throw std::invalid_argument("r0_list needs at least two radii");
  double lo = r0_list.front(), hi = r0_list.front();
  for (double r : r0_list) {
    if (!(r > 0.0 && r < 0.25))
      throw std::invalid_argument("r0 values must lie in (0, 1/4)");
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (hi / lo < 31.0)  // 10^1.5, rounded down
    throw std::invalid_argument("r0_list must span at least 1.5 decades");

  KernelParams params(data.spec.d, data.spec.alpha);
  const double eps = data.spec.epsilon;

  const BoundFitReport fit = fit_lower_bound(
      data, detail::logspace(std::min(lo, 1e-3), 1e-1, 12), 1200, sim.quadrature);

  CollapseScalingReport report;
  report.time_cap = 10.0 * std::pow(hi, eps) / (eps * fit.empirical_delta1);

  const RadialMeasure m0 = discretize(data, grid, sim.quadrature);
  const FlowState start = initial_state(m0);
  const Trajectory traj = integrate(start, params, sim, report.time_cap);

  for (double r0 : r0_list) {
    CollapseSample sample;
    sample.r0 = r0;
    sample.label = start.initial_radii.front();
    double best = std::numeric_limits<double>::infinity();
    for (double lab : start.initial_radii) {
      const double dist = std::fabs(std::log(lab / r0));
      if (dist < best) {
        best = dist;
        sample.label = lab;
      }
    }
    sample.censored = true;
    sample.absorb_time = std::numeric_limits<double>::quiet_NaN();
    for (const FlowEvent& ev : traj.events) {
      if (ev.kind == EventKind::absorb && ev.label == sample.label) {
        sample.absorb_time = ev.time;
        sample.censored = false;
        break;
      }
    }
    report.samples.push_back(sample);
  }

  // Least squares of log(t_absorb) on log(r0) over the uncensored samples.
  std::vector<double> xs, ys;
  for (const CollapseSample& s : report.samples) {
    if (s.censored) continue;
    xs.push_back(std::log(s.r0));
    ys.push_back(std::log(s.absorb_time));
  }
  const std::size_t n = xs.size();
  if (n >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    report.slope = sxy / sxx;
    if (n >= 3) {
      double ss_res = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double fit_y = my + report.slope * (xs[i] - mx);
        ss_res += (ys[i] - fit_y) * (ys[i] - fit_y);
      }
      report.slope_stderr =
          std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Critical-ratio curve

struct RatioCurve {
  double time;
  // (label r, mu0(closed ball of the label) / R_t(r)^{2-alpha}), r decreasing.
  std::vector<std::pair<double, double>> pairs;
};

// The discrete lower-bound curve for the critical norm: initial mass inside
// the label's ball over the evolved radius to the power 2-alpha.  Uses the
// trajectory's own initial snapshot for mu0, which is exactly the mass the
// flow transports.  Labels whose rings were absorbed or merged away no
// longer appear.
inline RatioCurve critical_ratio_curve(const Trajectory& traj, double t,
                                       const KernelParams& params) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("trajectory holds no snapshots");
  const FlowState& first = traj.snapshots.front();
  if (t < first.time - 1e-14 * std::max(1.0, std::fabs(first.time)))
    throw std::domain_error("t is before the first recorded snapshot");

  const FlowState* best = &first;
  for (const FlowState& s : traj.snapshots)
    if (std::fabs(s.time - t) < std::fabs(best->time - t)) best = &s;

  RatioCurve curve;
  curve.time = best->time;
  const double expo = 2.0 - params.alpha;
  for (std::size_t i = best->measure.rings.size(); i-- > 0;) {
    const double label = best->initial_radii[i];
    const double rt = best->measure.rings[i].radius;
    const double mu0 = mass_in_ball(first.measure, label);
    curve.pairs.emplace_back(label, mu0 / std::pow(rt, expo));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Similarity solutions (alpha = 1)

struct SimilarityReport {
  double lambda_hat;                  // fitted collapse rate v = -lambda r
  double residual;                    // max_i |w(rho_i)/rho_i - lambda_hat|
  std::vector<double> support_radii;
};

// A measure shrinks self-similarly exactly when every ring's inward speed is
// proportional to its radius.  lambda_hat is the mass-weighted mean of
// w(rho_i)/rho_i and the residual its worst deviation; zero residual (to
// quadrature tolerance) characterizes similarity data.
inline SimilarityReport similarity_residual(const RadialMeasure& m, int d,
                                            const QuadratureConfig& q = {}) {
  if (m.rings.empty())
    throw std::invalid_argument("similarity_residual needs at least one ring");
  KernelParams params(d, 1.0);
  SimilarityReport report;
  std::vector<double> rates;
  double mass = 0.0, weighted = 0.0;
  for (const Ring& ring : m.rings) {
    const double w = -radial_velocity(m, ring.radius, params, q);
    rates.push_back(w / ring.radius);
    report.support_radii.push_back(ring.radius);
    mass += ring.mass;
    weighted += ring.mass * rates.back();
  }
  report.lambda_hat = weighted / mass;
  report.residual = 0.0;
  for (double rate : rates)
    report.residual = std::max(report.residual, std::fabs(rate - report.lambda_hat));
  return report;
}

// Strictness margin w(rho1) - (rho1/rho2) w(rho2) for a two-ring measure in
// d >= 3; positive margin is exactly the obstruction that rules out two-ring
// similarity data there.
inline double two_ring_inequality_witness(int d, double rho1, double rho2,
                                          double m1, double m2,
                                          const QuadratureConfig& q = {}) {
  if (d < 3) throw std::domain_error("d must be an integer >= 3");
  if (!(rho1 > 0.0 && rho2 > rho1))
    throw std::domain_error("radii must satisfy 0 < rho1 < rho2");
  if (!(m1 > 0.0 && m2 > 0.0 && m1 + m2 <= 1.0 + 1e-12))
    throw std::domain_error("masses must be positive with m1 + m2 <= 1");
  KernelParams params(d, 1.0);
  RadialMeasure m;
  m.rings = {{m1, rho1}, {m2, rho2}};
  const double w1 = -radial_velocity(m, rho1, params, q);
  const double w2 = -radial_velocity(m, rho2, params, q);
  return w1 - (rho1 / rho2) * w2;
}

struct TwoRingSimilarity {
  bool feasible;    // both masses clear the positivity threshold
  double m1, m2;    // solved masses (sum to 1), regardless of feasibility
  double rho1, rho2;
  double residual;  // similarity residual of the solved measure; NaN if infeasible
};

// Masses below this are indistinguishable from quadrature noise around an
// exactly-zero solution, so they do not count as a positive-mass solution.
inline constexpr double kTwoRingMassTol = 1e-8;

// Solve the 2x2 linear system "both rings shrink at the same relative rate,
// masses sum to 1" for a two-ring configuration in dimension d.  Writing
// qr = rho2/rho1, the proportionality condition reduces to
//   m1 [qr phi(1) - phi(qr)] + m2 [qr phi(1/qr) - phi(1)] = 0.
inline TwoRingSimilarity solve_two_ring_similarity(int d, double rho1,
                                                   double rho2,
                                                   const QuadratureConfig& q = {}) {
  if (d < 2) throw std::domain_error("d must be an integer >= 2");
  if (!(rho1 > 0.0 && rho2 > rho1))
    throw std::domain_error("radii must satisfy 0 < rho1 < rho2");
  const double qr = rho2 / rho1;
  const double a = qr * phi(1.0, d, q) - phi(qr, d, q);
  const double b = qr * phi(1.0 / qr, d, q) - phi(1.0, d, q);
  const double denom = b - a;
  if (std::fabs(denom) < 1e-12 * (std::fabs(a) + std::fabs(b) + 1e-300))
    throw std::runtime_error("two-ring similarity system is singular");

  TwoRingSimilarity out;
  out.rho1 = rho1;
  out.rho2 = rho2;
  out.m1 = b / denom;
  out.m2 = -a / denom;
  out.feasible = out.m1 > kTwoRingMassTol && out.m2 > kTwoRingMassTol;
  out.residual = std::numeric_limits<double>::quiet_NaN();
  if (out.feasible) {
    RadialMeasure m;
    m.rings = {{out.m1, rho1}, {out.m2, rho2}};
    out.residual = similarity_residual(m, d, q).residual;
  }
  return out;
}

// The d=2 search: the only dimension where the solved masses can both come
// out positive.
inline TwoRingSimilarity search_two_ring_similarity_d2(double rho1, double rho2,
                                                       const QuadratureConfig& q = {}) {
  return solve_two_ring_similarity(2, rho1, rho2, q);
}

// ---------------------------------------------------------------------------
// Kernel property verification

struct PropertyCheck {
  std::string name;
  bool pass;
  double margin;  // >= 0 is a pass; the worst margin over the sampled points
};

struct KernelPropertyReport {
  std::vector<PropertyCheck> checks;

  bool all_pass() const {
    for (const PropertyCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Check the qualitative kernel claims on a sample grid: positivity and
// strict decay of psi, psi(0) = 1, the power-law tail (value and the decay
// of its error from rho = 1e2 to 1e6), and, for alpha = 1, the curvature
// pattern of phi in the three dimension regimes.
inline KernelPropertyReport verify_kernel_properties(const KernelParams& params,
                                                     const std::vector<double>& grid,
                                                     const QuadratureConfig& q = {}) {
  if (grid.size() < 50)
    throw std::invalid_argument("grid must hold at least 50 points");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] >= 0.0 && grid[i] < grid[i + 1]))
      throw std::invalid_argument("grid must be nonnegative and strictly increasing");

  KernelPropertyReport report;
  auto add = [&](const std::string& name, double margin) {
    report.checks.push_back({name, margin >= 0.0, margin});
  };

  std::vector<double> values;
  values.reserve(grid.size());
  for (double rho : grid) values.push_back(psi(rho, params, q));

  double min_value = values.front();
  for (double v : values) min_value = std::min(min_value, v);
  add("psi_positive", min_value);

  double min_drop = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    min_drop = std::min(min_drop, values[i] - values[i + 1]);
  add("psi_strictly_decreasing", min_drop);

  add("psi_at_zero", 1e-8 - std::fabs(psi(0.0, params, q) - 1.0));

  const double c = asymptotic_constant(params);
  auto tail_err = [&](double rho) {
    return std::fabs(psi(rho, params, q) * std::pow(rho, 2.0 - params.alpha) / c - 1.0);
  };
  const double e2 = tail_err(1e2), e4 = tail_err(1e4), e6 = tail_err(1e6);
  add("asymptote_value_at_1e6", 0.01 - e6);
  // The error sits on the quadrature noise floor once it reaches ~1e-10
  // (exactly so for the d=3, alpha=1 closed-form tail), hence the allowance.
  add("asymptote_error_decay", std::min(e2 - e4, e4 - e6) + 1e-9);

  if (params.alpha == 1.0) {
    const std::vector<double> inner = detail::logspace(0.05, 0.95, 16);
    const std::vector<double> outer = detail::logspace(1.05, 50.0, 16);
    if (params.d == 2) {
      double worst = std::numeric_limits<double>::infinity();
      for (double r : inner) worst = std::min(worst, phi_derivative(r, 2, 2, q));
      add("phi_convex_below_one", worst);
      worst = std::numeric_limits<double>::infinity();
      for (double r : outer) worst = std::min(worst, -phi_derivative(r, 2, 2, q));
      add("phi_concave_above_one", worst);
    } else if (params.d == 3) {
      double dev = 0.0;
      for (double r : inner) dev = std::max(dev, std::fabs(phi_derivative(r, 3, 2, q)));
      add("phi_linear_below_one", 1e-8 - dev);
      double worst = std::numeric_limits<double>::infinity();
      for (double r : outer) worst = std::min(worst, -phi_derivative(r, 3, 2, q));
      add("phi_concave_above_one", worst);
    } else {
      double worst = std::numeric_limits<double>::infinity();
      for (double r : inner) worst = std::min(worst, -phi_derivative(r, params.d, 2, q));
      for (double r : outer) worst = std::min(worst, -phi_derivative(r, params.d, 2, q));
      add("phi_concave_everywhere", worst);
    }
  }
  return report;
}

}  // namespace agglab

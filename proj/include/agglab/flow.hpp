#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "agglab/kernels.hpp"
#include "agglab/quadrature.hpp"
#include "agglab/radial_measure.hpp"

// Lagrangian dynamics of the ring system.  Every ring moves with the radial
// velocity induced by the whole measure,
//
//   dR_i/dt = v(R_i),    v(r) = -alpha r^{alpha-1} [ m0 + sum_j m_j psi(R_j/r) ],
//
// the origin atom never moves, and a ring reaching absorb_radius transfers
// its mass to the atom.  The stepper is the Dormand-Prince 5(4) embedded
// pair with Hairer's quartic dense output; absorption times are located by
// bisecting the dense interpolant inside the accepted step, which costs no
// extra velocity evaluations.

namespace agglab {

struct SimConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-14;
  double absorb_radius = 1e-9;  // ring mass moves to the origin atom here
  double merge_gap = 0.0;       // adjacent rings at least this close coalesce
  double max_step = 0.0;        // cap on the ODE step, 0 = uncapped
  double record_every = 0.0;    // snapshot spacing, 0 = events/endpoints only
  QuadratureConfig quadrature{};
  bool use_closed_form_d3 = true;   // exact prefix-sum velocity for d=3, alpha=1
  bool use_kernel_cache = true;     // interpolate psi from a log-uniform table
  double cache_log_spacing = 5e-4;  // table spacing in log(rho)
  int n_threads = 1;                // parallel velocity rows; results identical
                                    // for any thread count

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw std::invalid_argument("ODE tolerances must be > 0");
    if (!(absorb_radius > 0.0))
      throw std::invalid_argument("absorb_radius must be > 0");
    if (merge_gap < 0.0) throw std::invalid_argument("merge_gap must be >= 0");
    if (max_step < 0.0) throw std::invalid_argument("max_step must be >= 0");
    if (record_every < 0.0)
      throw std::invalid_argument("record_every must be >= 0");
    if (!(cache_log_spacing > 0.0))
      throw std::invalid_argument("cache_log_spacing must be > 0");
    if (n_threads < 1) throw std::invalid_argument("n_threads must be >= 1");
  }
};

enum class EventKind { absorb, merge };

inline const char* to_string(EventKind k) {
  return k == EventKind::absorb ? "absorb" : "merge";
}

struct FlowEvent {
  double time;
  EventKind kind;
  double label;  // initial radius of the ring that vanished
};

struct FlowState {
  double time = 0.0;
  RadialMeasure measure;
  std::vector<double> initial_radii;  // labels r of R_t(r), parallel to rings
};

// Tag every ring of a fresh measure with its own radius as the label.
inline FlowState initial_state(RadialMeasure m, double time = 0.0) {
  FlowState s;
  s.time = time;
  s.measure = std::move(m);
  s.initial_radii.reserve(s.measure.rings.size());
  for (const Ring& r : s.measure.rings) s.initial_radii.push_back(r.radius);
  return s;
}

struct Trajectory {
  std::vector<FlowState> snapshots;  // strictly increasing times
  std::vector<FlowEvent> events;
};

// Step-size underflow (or other unrecoverable stepping failure).  Carries
// whatever was integrated before the failure so callers can still write
// partial artifacts.
class flow_error : public std::runtime_error {
 public:
  flow_error(const std::string& msg, Trajectory partial)
      : std::runtime_error(msg), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// Radial velocity induced by the measure at radius r > 0, straight from the
// definition (one quadrature per ring).  A ring evaluated at its own radius
// contributes its self-term m * psi(1).
inline double radial_velocity(const RadialMeasure& m, double r,
                              const KernelParams& params,
                              const QuadratureConfig& q = {}) {
  if (!(r > 0.0))
    throw std::domain_error("r must be > 0 (velocity is defined away from the origin)");
  if (!params.attractive())
    throw std::domain_error("alpha must lie in (0, 2) for attractive dynamics");
  double s = m.origin_mass;  // psi(0) = 1
  for (const Ring& ring : m.rings) s += ring.mass * psi(ring.radius / r, params, q);
  return -params.alpha * std::pow(r, params.alpha - 1.0) * s;
}

namespace detail {

// Lazily filled table of psi on a log-uniform grid, shared by the velocity
// rows of one integration.  Empty slots hold 0 (psi is strictly positive);
// concurrent fills race benignly because every thread writes the identical
// value.  Lookups interpolate linearly in log(rho) so the assembled velocity
// is continuous in the radii; rho = 1 lands exactly on a node, keeping the
// self-term psi(1) free of interpolation error.
class PsiCache {
 public:
  PsiCache(const KernelParams& params, double log_spacing,
           const QuadratureConfig& quad)
      : params_(params), quad_(quad), h_(log_spacing) {
    // Below lo_cut, psi(rho) = 1 + O(rho^2) to within 1e-14; above the
    // quadrature config's asymptotic switch, psi itself uses the closed-form
    // tail.  Only the window between the two needs table nodes.
    k_lo_ = static_cast<int>(std::floor(std::log(kLoCut) / h_)) - 2;
    k_hi_ = static_cast<int>(std::ceil(std::log(quad.asymptotic_switch) / h_)) + 2;
    nodes_ = std::vector<std::atomic<double>>(
        static_cast<std::size_t>(k_hi_ - k_lo_ + 1));
  }

  double operator()(double rho) const {
    if (rho < kLoCut) return 1.0;
    if (rho >= quad_.asymptotic_switch) return psi(rho, params_, quad_);
    const double x = std::log(rho) / h_;
    int k = static_cast<int>(std::floor(x));
    k = std::min(std::max(k, k_lo_), k_hi_ - 1);
    const double w = x - k;
    const double v0 = node(k);
    const double v1 = node(k + 1);
    return v0 + w * (v1 - v0);
  }

 private:
  static constexpr double kLoCut = 1e-7;

  double node(int k) const {
    std::atomic<double>& slot = nodes_[static_cast<std::size_t>(k - k_lo_)];
    double v = slot.load(std::memory_order_relaxed);
    if (v == 0.0) {
      v = psi(std::exp(k * h_), params_, quad_);
      slot.store(v, std::memory_order_relaxed);
    }
    return v;
  }

  KernelParams params_;
  QuadratureConfig quad_;
  double h_;
  int k_lo_, k_hi_;
  mutable std::vector<std::atomic<double>> nodes_;
};

// Velocities of all rings at once.  d=3, alpha=1 collapses to exact prefix
// sums via the piecewise closed form of psi (O(n)); every other parameter
// pair runs the O(n^2) pair sum through the cache.  Rows are independent, so
// they may be computed on several threads; each row's summation order is
// fixed, which keeps results bit-identical for every thread count.
class VelocityAssembler {
 public:
  VelocityAssembler(const KernelParams& params, const SimConfig& cfg)
      : params_(params),
        quad_(cfg.quadrature),
        guard_(cfg.absorb_radius * 1e-3),
        threads_(cfg.n_threads),
        closed_form_(cfg.use_closed_form_d3 && params.d == 3 &&
                     params.alpha == 1.0) {
    if (!closed_form_ && cfg.use_kernel_cache)
      cache_ = std::make_unique<PsiCache>(params, cfg.cache_log_spacing, quad_);
  }

  // radii ascending; out[i] = v(radii[i]).  Trial ODE stages can push a
  // radius to 0 or slightly negative; such arguments are clamped to a tiny
  // positive guard so the fractional powers stay finite.  (Accepted states
  // never reach the guard: absorption triggers three decades above it.)
  void eval(double origin_mass, const std::vector<double>& masses,
            const std::vector<double>& radii, std::vector<double>& out) const {
    const std::size_t n = radii.size();
    out.resize(n);
    if (closed_form_) {
      // v(r) = -[ m0 + M_in - S_in/(3 r^2) + (2r/3) T_out ] with
      // M_in = sum_{rho_j <= r} m_j, S_in = sum_{rho_j <= r} m_j rho_j^2,
      // T_out = sum_{rho_j > r} m_j / rho_j.  The self-term falls in the
      // inner branch, worth m_i (1 - 1/3) = m_i psi(1).  Branch choice is by
      // index; a transiently unsorted trial stage only swaps branches for
      // the offending pair, and the two branches agree at rho_j = r, so the
      // assembled field remains continuous.
      double acc_m = origin_mass;
      double acc_s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::max(radii[i], guard_);
        acc_m += masses[i];
        acc_s += masses[i] * r * r;
        out[i] = acc_m - acc_s / (3.0 * r * r);
      }
      double acc_t = 0.0;
      for (std::size_t i = n; i-- > 0;) {
        const double r = std::max(radii[i], guard_);
        out[i] = -(out[i] + (2.0 * r / 3.0) * acc_t);
        acc_t += masses[i] / r;
      }
      return;
    }

    auto rows = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double r = std::max(radii[i], guard_);
        double s = origin_mass;  // psi(0) = 1
        for (std::size_t j = 0; j < n; ++j)
          s += masses[j] * psi_value(std::max(radii[j], guard_) / r);
        out[i] = -params_.alpha * std::pow(r, params_.alpha - 1.0) * s;
      }
    };

    if (threads_ > 1 && n >= 64) {
      const std::size_t nt = std::min<std::size_t>(threads_, n);
      std::vector<std::thread> pool;
      pool.reserve(nt);
      for (std::size_t w = 0; w < nt; ++w) {
        const std::size_t begin = n * w / nt;
        const std::size_t end = n * (w + 1) / nt;
        pool.emplace_back(rows, begin, end);
      }
      for (std::thread& th : pool) th.join();
    } else {
      rows(0, n);
    }
  }

 private:
  double psi_value(double rho) const {
    return cache_ ? (*cache_)(rho) : psi(rho, params_, quad_);
  }

  KernelParams params_;
  QuadratureConfig quad_;
  double guard_;
  int threads_;
  bool closed_form_;
  std::unique_ptr<PsiCache> cache_;
};

}  // namespace detail

// All ring velocities of a measure under one config; the same assembly the
// integrator runs internally.  Useful for cross-checking the closed-form and
// cached routes against radial_velocity.
inline std::vector<double> ring_velocities(const RadialMeasure& m,
                                           const KernelParams& params,
                                           const SimConfig& cfg = {}) {
  cfg.validate();
  if (!params.attractive())
    throw std::domain_error("alpha must lie in (0, 2) for attractive dynamics");
  m.validate();
  std::vector<double> masses, radii, v;
  masses.reserve(m.rings.size());
  radii.reserve(m.rings.size());
  for (const Ring& r : m.rings) {
    masses.push_back(r.mass);
    radii.push_back(r.radius);
  }
  detail::VelocityAssembler assembler(params, cfg);
  assembler.eval(m.origin_mass, masses, radii, v);
  return v;
}

namespace detail {

// Dormand-Prince 5(4) tableau, the classic RK45 with first-same-as-last.
inline constexpr double kDopriC[7] = {0.0,     1.0 / 5, 3.0 / 10, 4.0 / 5,
                                      8.0 / 9, 1.0,     1.0};
inline constexpr double kDopriA2[1] = {1.0 / 5};
inline constexpr double kDopriA3[2] = {3.0 / 40, 9.0 / 40};
inline constexpr double kDopriA4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
inline constexpr double kDopriA5[4] = {19372.0 / 6561, -25360.0 / 2187,
                                       64448.0 / 6561, -212.0 / 729};
inline constexpr double kDopriA6[5] = {9017.0 / 3168, -355.0 / 33,
                                       46732.0 / 5247, 49.0 / 176,
                                       -5103.0 / 18656};
// Row 7 equals the 5th-order weights b, so stage 7 is f at the new point.
inline constexpr double kDopriB[6] = {35.0 / 384,    0.0,        500.0 / 1113,
                                      125.0 / 192,   -2187.0 / 6784,
                                      11.0 / 84};
// b - b_hat: difference against the embedded 4th-order solution.
inline constexpr double kDopriE[7] = {71.0 / 57600,  0.0,
                                      -71.0 / 16695, 71.0 / 1920,
                                      -17253.0 / 339200, 22.0 / 525,
                                      -1.0 / 40};
// Weights of the quartic dense-output correction (Hairer/Norsett/Wanner).
inline constexpr double kDopriD[7] = {
    -12715105075.0 / 11282082432.0, 0.0,
    87487479700.0 / 32700410799.0,  -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0};

// Continuous extension over one accepted step:
//   y(t0 + theta h) = r1 + theta (r2 + (1-theta) (r3 + theta (r4 + (1-theta) r5))).
struct DenseOutput {
  double t0 = 0.0, h = 0.0;
  std::vector<double> r1, r2, r3, r4, r5;

  double eval(std::size_t i, double theta) const {
    const double u = 1.0 - theta;
    return r1[i] + theta * (r2[i] + u * (r3[i] + theta * (r4[i] + u * r5[i])));
  }
};

// First theta in (0, 1] at which component i falls to the target level.
// The interpolant is polynomial, so plain bisection on it is exact enough
// and costs no velocity evaluations.
inline double crossing_theta(const DenseOutput& dense, std::size_t i,
                             double target) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dense.eval(i, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace detail

// Integrate the ring ODE system from `initial` up to t_end.  Snapshots are
// recorded at the initial time, at every event, at multiples of
// record_every (interpolated from the dense output), and at t_end.  Rings
// whose radius falls to absorb_radius are absorbed into the origin atom at a
// bisected event time; a ring overtaking its neighbour (impossible for exact
// characteristics, so a pure discretization artifact) is merged with it,
// conserving mass and the mass-weighted radius.
inline Trajectory integrate(const FlowState& initial,
                            const KernelParams& params, const SimConfig& cfg,
                            double t_end) {
  cfg.validate();
  if (!params.attractive())
    throw std::domain_error("alpha must lie in (0, 2) for attractive dynamics");
  initial.measure.validate();
  if (!initial.initial_radii.empty() &&
      initial.initial_radii.size() != initial.measure.rings.size())
    throw std::invalid_argument("initial_radii must parallel the rings");
  if (!(t_end >= initial.time))
    throw std::invalid_argument("t_end must be >= the initial time");

  // Working copies of the state, kept sorted by radius at accepted times.
  double t = initial.time;
  double origin_mass = initial.measure.origin_mass;
  std::vector<double> radii, masses, labels;
  for (std::size_t i = 0; i < initial.measure.rings.size(); ++i) {
    radii.push_back(initial.measure.rings[i].radius);
    masses.push_back(initial.measure.rings[i].mass);
    labels.push_back(initial.initial_radii.empty()
                         ? initial.measure.rings[i].radius
                         : initial.initial_radii[i]);
  }

  Trajectory traj;

  auto tiny_at = [](double time) {
    return 1e-14 * std::max(1.0, std::fabs(time));
  };
  auto push_snapshot = [&](double time, bool replace_on_tie) {
    if (!traj.snapshots.empty()) {
      const double last = traj.snapshots.back().time;
      if (time <= last + tiny_at(time)) {
        if (!replace_on_tie) return;
        traj.snapshots.pop_back();
        time = std::max(time, last);
      }
    }
    FlowState s;
    s.time = time;
    s.measure.origin_mass = origin_mass;
    for (std::size_t i = 0; i < radii.size(); ++i)
      s.measure.rings.push_back({masses[i], radii[i]});
    s.initial_radii = labels;
    traj.snapshots.push_back(std::move(s));
  };

  auto erase_ring = [&](std::size_t i) {
    radii.erase(radii.begin() + static_cast<std::ptrdiff_t>(i));
    masses.erase(masses.begin() + static_cast<std::ptrdiff_t>(i));
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(i));
  };

  // Coalesce adjacent rings that touched (or came within merge_gap).  The
  // merged ring keeps the outer ring's label: the merged radius never
  // exceeds the outer current radius, so that label's trajectory stays
  // non-increasing; the inner label is retired in the event record.
  auto merge_scan = [&](double when) {
    bool any = false;
    std::size_t i = 0;
    while (i + 1 < radii.size()) {
      if (radii[i + 1] - radii[i] <= cfg.merge_gap || radii[i + 1] <= radii[i]) {
        const double m = masses[i] + masses[i + 1];
        const double r =
            (masses[i] * radii[i] + masses[i + 1] * radii[i + 1]) / m;
        traj.events.push_back({when, EventKind::merge, labels[i]});
        radii[i + 1] = r;
        masses[i + 1] = m;
        erase_ring(i);
        any = true;
        if (i > 0) --i;  // the merged ring may now touch its inner neighbour
      } else {
        ++i;
      }
    }
    return any;
  };

  // Absorb every ring at or below the threshold (mass to the origin atom).
  auto absorb_scan = [&](double when, double threshold) {
    bool any = false;
    std::size_t i = 0;
    while (i < radii.size()) {
      if (radii[i] <= threshold) {
        traj.events.push_back({when, EventKind::absorb, labels[i]});
        origin_mass += masses[i];
        erase_ring(i);
        any = true;
      } else {
        ++i;
      }
    }
    return any;
  };

  // Rings already inside the absorption radius collapse at the start.
  absorb_scan(t, cfg.absorb_radius);
  merge_scan(t);
  push_snapshot(t, true);

  if (t_end - t <= tiny_at(t_end)) return traj;

  detail::VelocityAssembler assembler(params, cfg);
  const std::size_t n_stages = 7;
  std::vector<std::vector<double>> k(n_stages);
  std::vector<double> y_stage, y1, y_err;
  detail::DenseOutput dense;

  long long record_index = 1;  // next multiple of record_every to emit
  auto next_record_time = [&]() {
    return cfg.record_every > 0.0
               ? initial.time + cfg.record_every * static_cast<double>(record_index)
               : std::numeric_limits<double>::infinity();
  };

  auto rhs = [&](const std::vector<double>& y, std::vector<double>& dy) {
    assembler.eval(origin_mass, masses, y, dy);
  };

  // Initial step size: a small fraction of the fastest ring's decay time.
  rhs(radii, k[0]);
  double h = t_end - t;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double v = std::fabs(k[0][i]);
    if (v > 0.0) h = std::min(h, 0.01 * radii[i] / v);
  }
  h = std::max(h, 1e-12);
  bool fsal_valid = true;  // k[0] holds f at the current state
  bool just_rejected = false;

  while (!radii.empty() && t_end - t > tiny_at(t_end)) {
    if (cfg.max_step > 0.0) h = std::min(h, cfg.max_step);
    h = std::min(h, t_end - t);
    if (h < 1e-14 * std::max(1.0, std::fabs(t)))
      throw flow_error("step size underflow at t = " + std::to_string(t),
                       std::move(traj));

    const std::size_t n = radii.size();
    if (!fsal_valid) {
      rhs(radii, k[0]);
      fsal_valid = true;
    }

    // Stages 2..7 (row 7 lands on the 5th-order solution: FSAL).
    auto stage = [&](std::size_t s, const double* a) {
      y_stage = radii;
      for (std::size_t j = 0; j < s; ++j)
        for (std::size_t i = 0; i < n; ++i) y_stage[i] += h * a[j] * k[j][i];
      rhs(y_stage, k[s]);
    };
    stage(1, detail::kDopriA2);
    stage(2, detail::kDopriA3);
    stage(3, detail::kDopriA4);
    stage(4, detail::kDopriA5);
    stage(5, detail::kDopriA6);

    y1 = radii;
    for (std::size_t j = 0; j < 6; ++j) {
      if (detail::kDopriB[j] == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i)
        y1[i] += h * detail::kDopriB[j] * k[j][i];
    }
    rhs(y1, k[6]);

    // Embedded error estimate, RMS over components.
    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < 7; ++j) e += detail::kDopriE[j] * k[j][i];
      e *= h;
      const double scale =
          cfg.abs_tol +
          cfg.rel_tol * std::max(std::fabs(radii[i]), std::fabs(y1[i]));
      const double q = e / scale;
      err += q * q;
      if (!std::isfinite(y1[i]) || !std::isfinite(e)) finite = false;
    }
    err = std::sqrt(err / static_cast<double>(n));

    if (!finite || !std::isfinite(err)) {
      h *= 0.3;
      just_rejected = true;
      fsal_valid = true;  // k[0] still matches the unchanged state
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      just_rejected = true;
      continue;
    }

    // Accepted: build the dense interpolant for records and event location.
    dense.t0 = t;
    dense.h = h;
    dense.r1 = radii;
    dense.r2.resize(n);
    dense.r3.resize(n);
    dense.r4.resize(n);
    dense.r5.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = y1[i] - radii[i];
      dense.r2[i] = delta;
      dense.r3[i] = h * k[0][i] - delta;
      dense.r4[i] = delta - h * k[6][i] - dense.r3[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < 7; ++j)
        acc += detail::kDopriD[j] * k[j][i];
      dense.r5[i] = h * acc;
    }

    // Earliest absorption inside the step, if any ring ends at/below the
    // threshold.  (A ring dipping below and recovering within one step is
    // not physical here: velocities are strictly negative.)
    double theta_stop = 1.0;
    bool absorbing = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (y1[i] <= cfg.absorb_radius) {
        absorbing = true;
        theta_stop =
            std::min(theta_stop,
                     detail::crossing_theta(dense, i, cfg.absorb_radius));
      }
    }
    const double t_new = absorbing ? t + theta_stop * h : t + h;

    // Interpolated snapshots strictly inside (t, t_new].
    while (next_record_time() < t_new - tiny_at(t_new)) {
      const double tr = next_record_time();
      if (tr > t + tiny_at(t)) {
        const double theta = (tr - t) / h;
        std::vector<double> saved = radii;
        for (std::size_t i = 0; i < n; ++i) radii[i] = dense.eval(i, theta);
        push_snapshot(tr, false);
        radii = std::move(saved);
      }
      ++record_index;
    }

    if (absorbing) {
      for (std::size_t i = 0; i < n; ++i)
        radii[i] = dense.eval(i, theta_stop);
      t = t_new;
      absorb_scan(t, cfg.absorb_radius * (1.0 + 1e-9));
      merge_scan(t);
      push_snapshot(t, true);
      fsal_valid = false;  // state changed discontinuously
      just_rejected = false;
      continue;
    }

    radii = y1;
    t = t_new;
    if (merge_scan(t)) {
      push_snapshot(t, true);
      fsal_valid = false;
    } else {
      k[0] = k[6];  // FSAL
    }
    if (std::fabs(next_record_time() - t) <= tiny_at(t)) {
      push_snapshot(next_record_time(), false);
      ++record_index;
    }

    double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    factor = std::min(factor, just_rejected ? 1.0 : 5.0);
    h *= std::max(factor, 0.2);
    just_rejected = false;
  }

  // All rings may be gone before t_end; the remaining atom is stationary,
  // so emit any outstanding record times with the frozen state.
  while (next_record_time() < t_end - tiny_at(t_end)) {
    push_snapshot(next_record_time(), false);
    ++record_index;
  }
  push_snapshot(t_end, false);
  return traj;
}

}  // namespace agglab

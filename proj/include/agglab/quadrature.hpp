#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace agglab {

struct QuadratureConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_subdivisions = 200;
  // psi/phi evaluations switch to their power-law tail above this argument,
  // where direct quadrature would only add cancellation noise.
  double asymptotic_switch = 1e8;
};

// Thrown when the adaptive rule cannot meet the requested tolerance. The best
// estimate so far and its error bound are preserved so callers can decide
// whether the partial answer is still usable.
class quadrature_error : public std::runtime_error {
 public:
  quadrature_error(const std::string& msg, double estimate, double error_bound)
      : std::runtime_error(msg), estimate_(estimate), error_bound_(error_bound) {}
  double estimate() const { return estimate_; }
  double error_bound() const { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK dqk15).
// Nodes are given for the positive half of [-1, 1]; odd indices and the
// center are the embedded Gauss points.
inline constexpr double kGk15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
inline constexpr double kGk15KronrodW[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kGk15GaussW[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct PanelEstimate {
  double integral = 0.0;
  double error = 0.0;
};

template <class F>
PanelEstimate gk15_panel(F&& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);

  const double fc = f(mid);
  double res_kronrod = kGk15KronrodW[7] * fc;
  double res_gauss = kGk15GaussW[3] * fc;
  double res_abs = kGk15KronrodW[7] * std::fabs(fc);

  double fv_lo[7], fv_hi[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kGk15Nodes[j];
    fv_lo[j] = f(mid - dx);
    fv_hi[j] = f(mid + dx);
    const double sum = fv_lo[j] + fv_hi[j];
    res_kronrod += kGk15KronrodW[j] * sum;
    res_abs += kGk15KronrodW[j] * (std::fabs(fv_lo[j]) + std::fabs(fv_hi[j]));
    if (j % 2 == 1) res_gauss += kGk15GaussW[j / 2] * sum;
  }

  // QUADPACK-style error estimate: scale the raw Gauss/Kronrod difference by
  // the variation of f over the panel so smooth regions are not overcharged.
  const double mean = 0.5 * res_kronrod;
  double res_asc = kGk15KronrodW[7] * std::fabs(fc - mean);
  for (int j = 0; j < 7; ++j) {
    res_asc += kGk15KronrodW[j] *
               (std::fabs(fv_lo[j] - mean) + std::fabs(fv_hi[j] - mean));
  }
  res_asc *= std::fabs(half);
  res_abs *= std::fabs(half);

  PanelEstimate out;
  out.integral = res_kronrod * half;
  double err = std::fabs((res_kronrod - res_gauss) * half);
  if (res_asc != 0.0 && err != 0.0)
    err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
  const double eps50 = 50.0 * std::numeric_limits<double>::epsilon();
  if (res_abs > std::numeric_limits<double>::min() / eps50)
    err = std::max(err, eps50 * res_abs);
  out.error = err;
  return out;
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [a, b]. Interior breakpoints
// seed the initial panel list; pass known kink/corner locations there.
// Converges when the summed error estimate drops below
// max(abs_tol, rel_tol * |integral|), otherwise splits the worst panel until
// max_subdivisions is exhausted.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureConfig& cfg = {},
                 std::vector<double> breakpoints = {}) {
  if (!(a < b)) {
    if (a == b) return 0.0;
    throw std::invalid_argument("integration bounds must satisfy a <= b");
  }

  struct Panel {
    double a, b;
    detail::PanelEstimate est;
  };

  breakpoints.erase(
      std::remove_if(breakpoints.begin(), breakpoints.end(),
                     [&](double x) { return !(x > a && x < b); }),
      breakpoints.end());
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  std::sort(breakpoints.begin(), breakpoints.end());

  std::vector<Panel> panels;
  double total = 0.0, total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (breakpoints[i] == breakpoints[i + 1]) continue;
    Panel p{breakpoints[i], breakpoints[i + 1], {}};
    p.est = detail::gk15_panel(f, p.a, p.b);
    total += p.est.integral;
    total_err += p.est.error;
    panels.push_back(p);
  }

  const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
  int splits = 0;
  while (total_err > std::max(cfg.abs_tol, cfg.rel_tol * std::fabs(total))) {
    if (splits >= cfg.max_subdivisions)
      throw quadrature_error(
          "quadrature did not converge within max_subdivisions", total,
          total_err);
    auto worst = std::max_element(
        panels.begin(), panels.end(),
        [](const Panel& x, const Panel& y) { return x.est.error < y.est.error; });
    const double m = 0.5 * (worst->a + worst->b);
    if (worst->b - worst->a < 64.0 * std::numeric_limits<double>::epsilon() * scale)
      throw quadrature_error(
          "quadrature stalled on an interval at roundoff width", total,
          total_err);
    Panel right{m, worst->b, {}};
    total -= worst->est.integral;
    total_err -= worst->est.error;
    worst->b = m;
    worst->est = detail::gk15_panel(f, worst->a, m);
    right.est = detail::gk15_panel(f, right.a, right.b);
    total += worst->est.integral + right.est.integral;
    total_err += worst->est.error + right.est.error;
    panels.push_back(right);
    ++splits;
  }
  return total;
}

}  // namespace agglab

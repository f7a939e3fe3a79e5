// Tabulates the sphere-averaged kernel psi(rho) for a few (d, alpha) pairs
// and shows how fast it approaches its power-law asymptote
// C(d, alpha) rho^(alpha - 2) as rho grows.

#include <cstdio>

#include "agglab/kernels.hpp"

int main() {
  const double rhos[] = {0.0, 0.25, 0.5, 1.0, 2.0, 10.0, 100.0, 1e4, 1e6};

  for (const auto& [d, alpha] : {std::pair<int, double>{2, 1.0},
                                 {3, 1.0},
                                 {3, 0.5},
                                 {5, 1.5}}) {
    const agglab::KernelParams params(d, alpha);
    const double c = agglab::asymptotic_constant(params);
    std::printf("d = %d, alpha = %.2f   (asymptote %.6f * rho^%.2f)\n", d,
                alpha, c, alpha - 2.0);
    std::printf("%10s %18s %18s\n", "rho", "psi", "psi/asymptote");
    for (double rho : rhos) {
      const double v = agglab::psi(rho, params);
      const double tail =
          rho > 0.0 ? v / (c * std::pow(rho, alpha - 2.0)) : 0.0;
      std::printf("%10.3g %18.12f %18.12f\n", rho, v, tail);
    }
    std::printf("\n");
  }
  return 0;
}

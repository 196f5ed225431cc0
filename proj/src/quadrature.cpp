#include "fvmatch/quadrature.hpp"

#include <cmath>

#include "fvmatch/errors.hpp"

namespace fvmatch {

GaussRule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw BadParams("gauss_legendre requires n >= 1");
  GaussRule1D rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  // Newton iteration on P_n from the Chebyshev initial guess.
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (b - a) * x + 0.5 * (a + b);
    rule.weights[static_cast<std::size_t>(i)] = 0.5 * (b - a) * w;
  }
  return rule;
}

}  // namespace fvmatch

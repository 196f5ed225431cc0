#pragma once

#include <vector>

namespace fvmatch {

/// Gauss-Legendre nodes and weights on [a, b].
struct GaussRule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule1D gauss_legendre(int n, double a, double b);

/// Adaptive Simpson integration of fn on [a, b] to absolute tolerance.
/// Intervals are bisected at least min_depth times before the error estimate
/// may accept them; a kink that lines up with the coarse nodes can otherwise
/// fake a zero estimate.
template <class Fn>
double adaptive_simpson(Fn&& fn, double a, double b, double abs_tol, int min_depth = 8,
                        int max_depth = 48) {
  auto simpson = [](double fa, double fm, double fb, double h) {
    return h / 6.0 * (fa + 4.0 * fm + fb);
  };
  struct Rec {
    double a, b, fa, fm, fb, whole;
    int depth;
  };
  double m0 = 0.5 * (a + b);
  double fa = fn(a), fm = fn(m0), fb = fn(b);
  double whole = simpson(fa, fm, fb, b - a);
  std::vector<Rec> stack{{a, b, fa, fm, fb, whole, 0}};
  double total = 0.0;
  while (!stack.empty()) {
    Rec r = stack.back();
    stack.pop_back();
    double m = 0.5 * (r.a + r.b);
    double lm = 0.5 * (r.a + m), rm = 0.5 * (m + r.b);
    double flm = fn(lm), frm = fn(rm);
    double left = simpson(r.fa, flm, r.fm, m - r.a);
    double right = simpson(r.fm, frm, r.fb, r.b - m);
    double err = left + right - r.whole;
    const bool converged =
        r.depth >= min_depth && std::abs(err) <= 15.0 * abs_tol * (r.b - r.a) / (b - a);
    if (converged || r.depth >= max_depth) {
      total += left + right + err / 15.0;
    } else {
      stack.push_back({r.a, m, r.fa, flm, r.fm, left, r.depth + 1});
      stack.push_back({m, r.b, r.fm, frm, r.fb, right, r.depth + 1});
    }
  }
  return total;
}

}  // namespace fvmatch

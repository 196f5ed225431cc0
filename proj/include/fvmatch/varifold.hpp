#pragma once

#include <vector>

#include <Eigen/Core>

#include "fvmatch/fem.hpp"
#include "fvmatch/mesh.hpp"

namespace fvmatch {

/// Bandwidths of the separable Gaussian kernel: position, tangent plane,
/// signal. All strictly positive.
struct KernelParams {
  double sigma_e = 1.0;
  double sigma_t = 1.0;
  double sigma_f = 1.0;

  KernelParams() = default;
  KernelParams(double se, double st, double sf);
};

/// Weighted Dirac atom (weight, point, plane through its unit normal, signal).
struct VarifoldAtom {
  double weight = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double signal = 0.0;
};

struct DiscreteVarifold {
  std::vector<VarifoldAtom> atoms;
};

/// One atom per triangle: (area, barycenter, unit normal, barycenter signal).
/// P1 signals are projected to P0 first. Throws DegenerateTriangle.
DiscreteVarifold from_fshape(const SignalP0& f);
DiscreteVarifold from_fshape(const SignalP1& f);

/// sqrt(2 (1 - <n1,n2>^2)), the non-oriented plane distance in [0, sqrt(2)].
double grassmann_distance(const Vec3& n1, const Vec3& n2);

/// Product Gaussian kernel between two atoms; atom weights are not included.
double atom_kernel(const VarifoldAtom& a, const VarifoldAtom& b, const KernelParams& kp);

/// Weighted double sum of atom kernels. Symmetric, bilinear.
double inner_product(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                     const KernelParams& kp);

/// <mu,mu> - 2<mu,nu> + <nu,nu>, with tiny negative rounding clamped to 0.
double squared_distance(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                        const KernelParams& kp);

/// Gradient of squared_distance(mu, nu) with respect to the source signal
/// values. mu must hold one atom per mesh triangle, in triangle order. For P1
/// each vertex receives one third of each incident triangle's barycenter
/// derivative.
Eigen::VectorXd signal_gradient(const TriangleMesh& mesh, const DiscreteVarifold& mu,
                                const DiscreteVarifold& nu, const KernelParams& kp,
                                ElementKind element);

namespace detail {

// Shared expression grouping so cached geometry factors recombine bitwise
// identically with the direct evaluation.
inline double pair_geometry(const VarifoldAtom& a, const VarifoldAtom& b,
                            const KernelParams& kp) {
  const double d2 = (a.point - b.point).squaredNorm();
  const double dot = a.normal.dot(b.normal);
  const double ke = std::exp(-d2 / (kp.sigma_e * kp.sigma_e));
  const double kt = std::exp(-2.0 * (1.0 - dot * dot) / (kp.sigma_t * kp.sigma_t));
  return (a.weight * b.weight) * (ke * kt);
}

inline double kf(double fa, double fb, const KernelParams& kp) {
  const double d = fa - fb;
  return std::exp(-d * d / (kp.sigma_f * kp.sigma_f));
}

// d/dfa of kf(fa, fb)
inline double dkf(double fa, double fb, const KernelParams& kp) {
  const double d = fa - fb;
  return -2.0 * d / (kp.sigma_f * kp.sigma_f) * kf(fa, fb, kp);
}

}  // namespace detail

}  // namespace fvmatch

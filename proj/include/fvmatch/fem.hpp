#pragma once

#include <vector>

#include <Eigen/Core>

#include "fvmatch/mesh.hpp"

namespace fvmatch {

enum class ElementKind { P0, P1 };

/// One value per triangle. The mesh must outlive the signal.
struct SignalP0 {
  const TriangleMesh* mesh = nullptr;
  Eigen::VectorXd values;

  SignalP0(const TriangleMesh& m, Eigen::VectorXd v);
};

/// One value per vertex (continuous piecewise-affine interpolant).
struct SignalP1 {
  const TriangleMesh* mesh = nullptr;
  Eigen::VectorXd values;

  SignalP1(const TriangleMesh& m, Eigen::VectorXd v);
};

/// Per-triangle constant gradient of a P1 signal; each vector lies in its
/// triangle's plane.
struct DiscreteGradient {
  const TriangleMesh* mesh = nullptr;
  std::vector<Vec3> per_triangle;
};

SignalP1 p1_assemble(const TriangleMesh& mesh, Eigen::VectorXd values);

/// Barycenter values (f1+f2+f3)/3 per triangle.
SignalP0 p0_project(const SignalP1& f);

/// Value of the affine interpolant at barycentric coordinates (b1,b2,b3) of
/// triangle k.
double eval_p1(const SignalP1& f, int k, double b1, double b2, double b3);

/// sum_k |T_k| |f_k|^p, exact for piecewise-constant signals. p >= 1.
double lp_norm_p0(const SignalP0& f, double p);

/// Midpoint Newton-Cotes rule (1/3) sum_k |T_k| (|f12|^p + |f13|^p + |f23|^p).
/// Exact for p=2; exact for p=1 when the signal has constant sign per
/// triangle. p must be 1 or 2.
double newton_cotes_lp(const SignalP1& f, int p);

/// Exact L1 norm of the affine interpolant: triangles whose vertex values
/// change sign are split at the zero segment into three one-signed
/// subtriangles.
double l1_exact(const SignalP1& f);

DiscreteGradient gradient(const SignalP1& f);

/// sum_k |T_k| sqrt(||grad f||^2 + eps^2); eps = 0 gives the discrete total
/// variation exactly.
double total_variation(const SignalP1& f, double eps = 0.0);

/// sum_k |T_k| ||grad f||^2
double h1_seminorm(const SignalP1& f);

/// L1 with |.| replaced by sqrt(.^2 + eps^2) at the quadrature nodes
/// (midpoints for P1, barycenter constant for P0). eps > 0.
double l1_smoothed(const SignalP0& f, double eps);
double l1_smoothed(const SignalP1& f, double eps);

}  // namespace fvmatch

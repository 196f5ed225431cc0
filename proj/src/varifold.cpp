#include "fvmatch/varifold.hpp"

#include <cmath>
#include <string>

#include "fvmatch/parallel.hpp"

namespace fvmatch {

KernelParams::KernelParams(double se, double st, double sf) : sigma_e(se), sigma_t(st), sigma_f(sf) {
  if (!(sigma_e > 0.0 && sigma_t > 0.0 && sigma_f > 0.0))
    throw BadParams("kernel bandwidths must be strictly positive");
}

namespace {

DiscreteVarifold atoms_from_p0(const TriangleMesh& mesh, const Eigen::VectorXd& values) {
  DiscreteVarifold mu;
  mu.atoms.reserve(static_cast<std::size_t>(mesh.num_triangles()));
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    if (mesh.is_degenerate(k))
      throw DegenerateTriangle("cannot build a varifold atom on degenerate triangle " +
                               std::to_string(k));
    const TriangleGeometry& g = mesh.raw_geometry(k);
    mu.atoms.push_back({g.area, g.barycenter, g.unit_normal, values[k]});
  }
  return mu;
}

}  // namespace

DiscreteVarifold from_fshape(const SignalP0& f) { return atoms_from_p0(*f.mesh, f.values); }

DiscreteVarifold from_fshape(const SignalP1& f) {
  SignalP0 projected = p0_project(f);
  return atoms_from_p0(*f.mesh, projected.values);
}

double grassmann_distance(const Vec3& n1, const Vec3& n2) {
  if (std::abs(n1.norm() - 1.0) > 1e-8 || std::abs(n2.norm() - 1.0) > 1e-8)
    throw NonUnitNormal("grassmann_distance requires unit normals");
  const double dot = n1.dot(n2);
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - dot * dot)));
}

double atom_kernel(const VarifoldAtom& a, const VarifoldAtom& b, const KernelParams& kp) {
  const double d2 = (a.point - b.point).squaredNorm();
  const double dot = a.normal.dot(b.normal);
  const double ke = std::exp(-d2 / (kp.sigma_e * kp.sigma_e));
  const double kt = std::exp(-2.0 * (1.0 - dot * dot) / (kp.sigma_t * kp.sigma_t));
  return ke * kt * detail::kf(a.signal, b.signal, kp);
}

double inner_product(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                     const KernelParams& kp) {
  const auto n = static_cast<std::int64_t>(mu.atoms.size());
  return parallel_sum(n, [&](std::int64_t i) {
    const VarifoldAtom& a = mu.atoms[static_cast<std::size_t>(i)];
    double row = 0.0;
    for (const VarifoldAtom& b : nu.atoms)
      row += detail::pair_geometry(a, b, kp) * detail::kf(a.signal, b.signal, kp);
    return row;
  });
}

double squared_distance(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                        const KernelParams& kp) {
  const double aa = inner_product(mu, mu, kp);
  const double bb = inner_product(nu, nu, kp);
  const double ab = inner_product(mu, nu, kp);
  double d = aa - 2.0 * ab + bb;
  if (d < 0.0 && d > -1e-10 * (aa + bb)) d = 0.0;
  return d;
}

Eigen::VectorXd signal_gradient(const TriangleMesh& mesh, const DiscreteVarifold& mu,
                                const DiscreteVarifold& nu, const KernelParams& kp,
                                ElementKind element) {
  const int nt = mesh.num_triangles();
  if (static_cast<int>(mu.atoms.size()) != nt)
    throw MeshMismatch("source varifold has " + std::to_string(mu.atoms.size()) +
                       " atoms for a mesh with " + std::to_string(nt) + " triangles");

  // d/df0_k of <mu,mu> - 2<mu,nu>
  Eigen::VectorXd per_triangle(nt);
  parallel_for(nt, [&](std::int64_t k) {
    const VarifoldAtom& a = mu.atoms[static_cast<std::size_t>(k)];
    double self = 0.0;
    for (const VarifoldAtom& b : mu.atoms)
      self += detail::pair_geometry(a, b, kp) * detail::dkf(a.signal, b.signal, kp);
    double cross = 0.0;
    for (const VarifoldAtom& c : nu.atoms)
      cross += detail::pair_geometry(a, c, kp) * detail::dkf(a.signal, c.signal, kp);
    per_triangle[k] = 2.0 * self - 2.0 * cross;
  });

  if (element == ElementKind::P0) return per_triangle;

  Eigen::VectorXd per_vertex = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int k = 0; k < nt; ++k) {
    const auto& t = mesh.triangle(k);
    for (int i = 0; i < 3; ++i) per_vertex[t[static_cast<std::size_t>(i)]] += per_triangle[k] / 3.0;
  }
  return per_vertex;
}

}  // namespace fvmatch

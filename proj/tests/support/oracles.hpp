// Test-side oracles, kept independent of the library's integration paths:
// dense triangle quadrature, a coarea-slicing L1 integrator driven by
// adaptive Simpson, and small mesh generators.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "fvmatch/mesh.hpp"
#include "fvmatch/quadrature.hpp"

namespace testsupport {

using fvmatch::TriangleMesh;
using fvmatch::Vec3;

struct BaryNode {
  double b1, b2, b3, w;
};

/// Degree-5 seven-point rule; weights sum to 1.
inline const std::array<BaryNode, 7>& triangle_rule_deg5() {
  static const std::array<BaryNode, 7> rule = {{
      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
      {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
      {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
      {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
      {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
      {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
      {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827},
  }};
  return rule;
}

/// integral over the mesh of |affine interpolant|^p by the degree-5 rule
/// (exact for p = 2).
inline double quad_abs_power(const TriangleMesh& mesh, const Eigen::VectorXd& vertex_values,
                             double p) {
  double total = 0.0;
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    const auto& t = mesh.triangle(k);
    const double f1 = vertex_values[t[0]], f2 = vertex_values[t[1]], f3 = vertex_values[t[2]];
    const double area = mesh.raw_geometry(k).area;
    for (const BaryNode& n : triangle_rule_deg5())
      total += area * n.w * std::pow(std::abs(n.b1 * f1 + n.b2 * f2 + n.b3 * f3), p);
  }
  return total;
}

/// Exact-at-convergence L1 of the affine interpolant via coarea slicing:
/// integrate |t| * level-length(t) over the value range with adaptive
/// Simpson. Entirely separate from any subtriangle construction.
inline double l1_slicing(const TriangleMesh& mesh, const Eigen::VectorXd& vertex_values) {
  double total = 0.0;
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    const auto& t = mesh.triangle(k);
    std::array<std::pair<double, Vec3>, 3> vs = {
        std::make_pair(vertex_values[t[0]], mesh.triangle_vertex(k, 0)),
        std::make_pair(vertex_values[t[1]], mesh.triangle_vertex(k, 1)),
        std::make_pair(vertex_values[t[2]], mesh.triangle_vertex(k, 2))};
    std::sort(vs.begin(), vs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double t1 = vs[0].first, t2 = vs[1].first, t3 = vs[2].first;
    if (t3 - t1 < 1e-300) {
      total += std::abs(t1) * mesh.raw_geometry(k).area;
      continue;
    }
    // in-plane gradient magnitude from a 2D frame
    const Vec3 e1 = vs[1].second - vs[0].second;
    const Vec3 e2 = vs[2].second - vs[0].second;
    Eigen::Matrix2d gram;
    gram << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
    const Eigen::Vector2d rhs(t2 - t1, t3 - t1);
    const Eigen::Vector2d coeff = gram.ldlt().solve(rhs);
    const double grad_norm =
        std::sqrt(std::max(0.0, coeff.dot(rhs)));  // |grad|^2 = coeff' G coeff = coeff' rhs
    // level-segment length peaks at t2
    const double s = (t2 - t1) / (t3 - t1);
    const Vec3 cut = vs[0].second + s * (vs[2].second - vs[0].second);
    const double peak = (vs[1].second - cut).norm();
    auto level_length = [&](double x) {
      if (x <= t1 || x >= t3) return 0.0;
      if (x <= t2) return t2 > t1 ? peak * (x - t1) / (t2 - t1) : peak;
      return t3 > t2 ? peak * (t3 - x) / (t3 - t2) : peak;
    };
    auto integrand = [&](double x) { return std::abs(x) * level_length(x); };
    const double scale = std::max({std::abs(t1), std::abs(t3)}) * peak * (t3 - t1) + 1e-300;
    total += fvmatch::adaptive_simpson(integrand, t1, t3, 1e-13 * scale) / grad_norm;
  }
  return total;
}

// --- mesh generators -------------------------------------------------------

inline TriangleMesh single_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  return TriangleMesh({a, b, c}, {{0, 1, 2}});
}

inline TriangleMesh unit_right_triangle() {
  return single_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0));
}

/// Two triangles tiling [0,1]^2 in the z=0 plane.
inline TriangleMesh unit_square() {
  return TriangleMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)},
                      {{0, 1, 2}, {0, 2, 3}});
}

/// nx-by-ny grid of step `step` in the z=0 plane, two triangles per cell.
inline TriangleMesh grid_mesh(int nx, int ny, double step) {
  std::vector<Vec3> vertices;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) vertices.emplace_back(i * step, j * step, 0.0);
  auto id = [ny](int i, int j) { return i * (ny + 1) + j; };
  std::vector<std::array<int, 3>> triangles;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

/// Grid with jittered vertices and a bumpy height field; never degenerate for
/// jitter < 0.5.
inline TriangleMesh random_mesh(std::uint64_t seed, int nx = 4, int ny = 4, double step = 0.5,
                                double jitter = 0.25, double bump = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> vertices;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      vertices.emplace_back(i * step + jitter * step * uni(rng), j * step + jitter * step * uni(rng),
                            bump * step * uni(rng));
  auto id = [ny](int i, int j) { return i * (ny + 1) + j; };
  std::vector<std::array<int, 3>> triangles;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

inline Eigen::VectorXd random_signal(std::uint64_t seed, int n, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = gauss(rng);
  return out;
}

/// Icosahedron refined `levels` times with vertices pushed to the unit sphere.
inline TriangleMesh icosphere(int levels) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                                {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                                {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : vertices) v.normalize();
  std::vector<std::array<int, 3>> triangles = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (vertices[static_cast<std::size_t>(a)] + vertices[static_cast<std::size_t>(b)]).normalized();
      vertices.push_back(m);
      int idx = static_cast<int>(vertices.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : triangles) {
      int a = mid(t[0], t[1]), b = mid(t[1], t[2]), c = mid(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    triangles = std::move(next);
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

inline Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Central finite differences of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

}  // namespace testsupport

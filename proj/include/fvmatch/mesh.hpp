#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "fvmatch/errors.hpp"

namespace fvmatch {

using Vec3 = Eigen::Vector3d;

/// Per-triangle geometric quantities, cached at mesh construction.
/// Edge convention: e1 = v3-v2, e2 = v1-v3, e3 = v2-v1, so e1+e2+e3 = 0 and
/// e2 x e3 equals the (unnormalized) triangle normal (v2-v1) x (v3-v1).
struct TriangleGeometry {
  double area = 0.0;
  Vec3 unit_normal = Vec3::Zero();  // sign given by the stored index order
  Vec3 barycenter = Vec3::Zero();
  std::array<Vec3, 3> edges{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double diameter = 0.0;  // longest edge length
};

/// Immutable triangle mesh. Construction validates index ranges, repeated
/// vertices inside a triangle, and that every edge is shared by at most two
/// triangles. Degenerate (near zero area) triangles are representable; the
/// geometry accessors that need a normal reject them.
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const Vec3& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const std::array<int, 3>& triangle(int k) const { return triangles_[static_cast<std::size_t>(k)]; }

  /// Edges incident to exactly one triangle.
  const std::vector<std::array<int, 2>>& boundary_edges() const { return boundary_edges_; }

  /// Cached geometry without the degeneracy check (unit_normal is the zero
  /// vector on a degenerate triangle).
  const TriangleGeometry& raw_geometry(int k) const { return geometry_[static_cast<std::size_t>(k)]; }

  /// area <= 1e-14 * (longest edge)^2
  bool is_degenerate(int k) const;

  /// True when every interior edge is traversed in opposite directions by its
  /// two triangles. Reported by meshcheck, never enforced.
  bool orientation_consistent() const;

  const Vec3& triangle_vertex(int k, int i) const {
    return vertices_[static_cast<std::size_t>(triangles_[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])];
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<TriangleGeometry> geometry_;
  std::vector<std::array<int, 2>> boundary_edges_;
};

/// Full geometry of triangle k. Throws DegenerateTriangle below the area
/// threshold.
TriangleGeometry triangle_geometry(const TriangleMesh& mesh, int k);

/// Edge midpoints v12, v13, v23. Valid for degenerate triangles too.
std::array<Vec3, 3> edge_midpoints(const TriangleMesh& mesh, int k);

/// Largest triangle diameter. Throws EmptyMesh.
double mesh_diameter(const TriangleMesh& mesh);

/// max_k h_T / rho_T with rho_T the inscribed-circle diameter 4*area/perimeter.
double regularity_constant(const TriangleMesh& mesh);

/// Sum of triangle areas; 0 for an empty mesh.
double total_area(const TriangleMesh& mesh);

/// Drops vertices referenced by no triangle and remaps indices.
/// old_to_new[i] is the new index of vertex i, or -1 if dropped.
void compact_mesh(std::vector<Vec3>& vertices, std::vector<std::array<int, 3>>& triangles,
                  std::vector<int>& old_to_new);

}  // namespace fvmatch

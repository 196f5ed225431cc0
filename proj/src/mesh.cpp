#include "fvmatch/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>

namespace fvmatch {

namespace {

TriangleGeometry compute_geometry(const Vec3& v1, const Vec3& v2, const Vec3& v3) {
  TriangleGeometry g;
  Vec3 n = (v2 - v1).cross(v3 - v1);
  g.area = 0.5 * n.norm();
  g.unit_normal = g.area > 0.0 ? Vec3(n / n.norm()) : Vec3::Zero();
  g.barycenter = (v1 + v2 + v3) / 3.0;
  g.edges = {Vec3(v3 - v2), Vec3(v1 - v3), Vec3(v2 - v1)};
  g.diameter = std::max({g.edges[0].norm(), g.edges[1].norm(), g.edges[2].norm()});
  return g;
}

constexpr double kDegeneracyFactor = 1e-14;  // area <= factor * diameter^2

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nv = num_vertices();
  geometry_.reserve(triangles_.size());
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t k = 0; k < triangles_.size(); ++k) {
    const auto& t = triangles_[k];
    for (int i = 0; i < 3; ++i) {
      if (t[static_cast<std::size_t>(i)] < 0 || t[static_cast<std::size_t>(i)] >= nv)
        throw InvalidMesh("triangle " + std::to_string(k) + " references vertex " +
                          std::to_string(t[static_cast<std::size_t>(i)]) + " out of range");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw InvalidMesh("triangle " + std::to_string(k) + " repeats a vertex index");
    for (int i = 0; i < 3; ++i) {
      int a = t[static_cast<std::size_t>(i)];
      int b = t[static_cast<std::size_t>((i + 1) % 3)];
      auto key = std::minmax(a, b);
      if (++edge_count[key] > 2)
        throw InvalidMesh("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                          ") is shared by more than two triangles");
    }
    geometry_.push_back(compute_geometry(vertices_[static_cast<std::size_t>(t[0])],
                                         vertices_[static_cast<std::size_t>(t[1])],
                                         vertices_[static_cast<std::size_t>(t[2])]));
  }
  for (const auto& [key, count] : edge_count)
    if (count == 1) boundary_edges_.push_back({key.first, key.second});
}

bool TriangleMesh::is_degenerate(int k) const {
  const TriangleGeometry& g = geometry_[static_cast<std::size_t>(k)];
  return g.area <= kDegeneracyFactor * g.diameter * g.diameter;
}

bool TriangleMesh::orientation_consistent() const {
  // Interior edges must be traversed once per direction.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : triangles_) {
    for (int i = 0; i < 3; ++i) {
      int a = t[static_cast<std::size_t>(i)];
      int b = t[static_cast<std::size_t>((i + 1) % 3)];
      if (++directed[{a, b}] > 1) return false;
    }
  }
  return true;
}

TriangleGeometry triangle_geometry(const TriangleMesh& mesh, int k) {
  if (k < 0 || k >= mesh.num_triangles())
    throw InvalidMesh("triangle index " + std::to_string(k) + " out of range");
  if (mesh.is_degenerate(k))
    throw DegenerateTriangle("triangle " + std::to_string(k) + " is degenerate (area " +
                             std::to_string(mesh.raw_geometry(k).area) + ")");
  return mesh.raw_geometry(k);
}

std::array<Vec3, 3> edge_midpoints(const TriangleMesh& mesh, int k) {
  if (k < 0 || k >= mesh.num_triangles())
    throw InvalidMesh("triangle index " + std::to_string(k) + " out of range");
  const Vec3& v1 = mesh.triangle_vertex(k, 0);
  const Vec3& v2 = mesh.triangle_vertex(k, 1);
  const Vec3& v3 = mesh.triangle_vertex(k, 2);
  return {Vec3(0.5 * (v1 + v2)), Vec3(0.5 * (v1 + v3)), Vec3(0.5 * (v2 + v3))};
}

double mesh_diameter(const TriangleMesh& mesh) {
  if (mesh.num_triangles() == 0) throw EmptyMesh("mesh_diameter of an empty mesh");
  double d = 0.0;
  for (int k = 0; k < mesh.num_triangles(); ++k) d = std::max(d, mesh.raw_geometry(k).diameter);
  return d;
}

double regularity_constant(const TriangleMesh& mesh) {
  if (mesh.num_triangles() == 0) throw EmptyMesh("regularity_constant of an empty mesh");
  double worst = 0.0;
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    if (mesh.is_degenerate(k))
      throw DegenerateTriangle("triangle " + std::to_string(k) + " is degenerate");
    const TriangleGeometry& g = mesh.raw_geometry(k);
    double perimeter = g.edges[0].norm() + g.edges[1].norm() + g.edges[2].norm();
    double incircle_diameter = 4.0 * g.area / perimeter;
    worst = std::max(worst, g.diameter / incircle_diameter);
  }
  return worst;
}

double total_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (int k = 0; k < mesh.num_triangles(); ++k) a += mesh.raw_geometry(k).area;
  return a;
}

void compact_mesh(std::vector<Vec3>& vertices, std::vector<std::array<int, 3>>& triangles,
                  std::vector<int>& old_to_new) {
  old_to_new.assign(vertices.size(), -1);
  int next = 0;
  for (const auto& t : triangles)
    for (int idx : t)
      if (idx >= 0 && idx < static_cast<int>(vertices.size()) &&
          old_to_new[static_cast<std::size_t>(idx)] < 0)
        old_to_new[static_cast<std::size_t>(idx)] = next++;
  std::vector<Vec3> kept(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < vertices.size(); ++i)
    if (old_to_new[i] >= 0) kept[static_cast<std::size_t>(old_to_new[i])] = vertices[i];
  vertices = std::move(kept);
  for (auto& t : triangles)
    for (int& idx : t) idx = old_to_new[static_cast<std::size_t>(idx)];
}

}  // namespace fvmatch

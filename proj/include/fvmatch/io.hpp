#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fvmatch/fem.hpp"
#include "fvmatch/mesh.hpp"

namespace fvmatch {

/// Mesh plus a scalar signal block, as stored on disk. OFF meshes carry the
/// signal in a trailing `#SIGNAL vertex|face N` block; ASCII PLY meshes carry
/// a `signal` property on the vertex or face element.
struct FShapeFile {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  ElementKind element = ElementKind::P1;
  Eigen::VectorXd signal;
};

/// Validated in-memory form; unreferenced vertices have been dropped.
struct BuiltFShape {
  std::shared_ptr<TriangleMesh> mesh;
  ElementKind element = ElementKind::P1;
  Eigen::VectorXd signal;
};

/// Format chosen by extension: .off or .ply. Throws ParseError with the
/// offending line, CountMismatch on bad counts.
FShapeFile load_fshape(const std::string& path);
void save_fshape(const FShapeFile& fshape, const std::string& path);

BuiltFShape build_fshape(const FShapeFile& file);
FShapeFile to_file(const TriangleMesh& mesh, ElementKind element, const Eigen::VectorXd& signal);

/// 17-significant-digit decimal, shortest round-trip form of %.17g.
std::string format_g17(double value);

/// Header row plus numeric rows; NaN cells are written empty.
void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows);

}  // namespace fvmatch

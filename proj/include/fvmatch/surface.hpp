#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fvmatch/energy_model.hpp"
#include "fvmatch/fem.hpp"
#include "fvmatch/mesh.hpp"
#include "fvmatch/quadrature.hpp"
#include "fvmatch/varifold.hpp"

namespace fvmatch {

/// Scalar signal given in surface parameters.
using AnalyticSignal = std::function<double(double u, double v)>;

struct ParamRect {
  double u0 = 0.0, u1 = 1.0, v0 = 0.0, v1 = 1.0;
};

/// Closest point on the surface, with parameters clamped into the domain when
/// the unconstrained foot would fall outside.
struct ClosestPoint {
  double u = 0.0, v = 0.0;
  Vec3 foot = Vec3::Zero();
  double distance = 0.0;
};

/// Normal projection inside the normal neighborhood:
/// p = foot + t * normal(foot).
struct Projection {
  double u = 0.0, v = 0.0;
  Vec3 foot = Vec3::Zero();
  double t = 0.0;
};

/// Parametric reference surface over a rectangular (u,v) domain.
///
/// Curvature sign convention: principal_curvatures returns the eigenvalues of
/// the differential of the Gauss map for the surface's own normal field, so
/// the unit sphere with outward normal has +1/R, and the Jacobian of the
/// normal projection is cos(alpha) / ((1 + t_sign*d*k1)(1 + t_sign*d*k2))
/// with t_sign the sign of the offset along the normal.
class AnalyticSurface {
 public:
  virtual ~AnalyticSurface() = default;

  virtual std::string name() const = 0;
  virtual ParamRect domain() const = 0;
  virtual Vec3 position(double u, double v) const = 0;
  virtual Vec3 tangent_u(double u, double v) const = 0;
  virtual Vec3 tangent_v(double u, double v) const = 0;
  virtual Vec3 normal(double u, double v) const = 0;
  virtual Eigen::Vector2d principal_curvatures(double u, double v) const = 0;

  /// Radius of the tubular neighborhood in which the normal projection is
  /// unique.
  virtual double reach() const = 0;

  /// Surface area (closed form for the builtins).
  virtual double area() const = 0;

  /// Closest point with domain clamping; always returns a candidate.
  virtual ClosestPoint closest_point(const Vec3& p) const;

  /// Normal projection. Throws OutsideReach when p is not in the normal
  /// neighborhood (foot on the boundary with a non-normal offset, or
  /// |t| >= reach).
  Projection project(const Vec3& p) const;

  bool in_normal_neighborhood(const Vec3& p) const;

  /// True when (u,v) lies in the (closed) parameter domain.
  bool param_inside(double u, double v, double tol = 0.0) const;

 protected:
  /// Multistart damped projected Newton on |p - phi(u,v)|^2; used by surfaces
  /// without a closed-form projection.
  ClosestPoint closest_point_newton(const Vec3& p) const;
};

/// sphere_cap:     radius (default 1), theta_max (default pi/3); cap around +z,
///                 parameters (u,v) = (polar angle, azimuth).
/// cylinder_patch: radius (1), u0,u1 (azimuth, default -pi/3..pi/3),
///                 v0,v1 (height, default 0..1); axis along z.
/// monge_patch:    x0,x1,y0,y1 (default unit square), amp (0), kx, ky (pi);
///                 graph z = amp*sin(kx*x)*sin(ky*y).
/// All accept tx,ty,tz to translate the surface.
std::shared_ptr<AnalyticSurface> builtin_surface(const std::string& name,
                                                 const std::map<std::string, double>& params = {});

/// Structured triangulation with target edge length h. Vertices lie on the
/// surface except the outermost ring, which sits past the boundary (on the
/// natural extension of the parametrization) at offset ~h^2/2 so the mesh
/// covers the surface and the overhang area is O(h^2).
TriangleMesh sample_triangulation(const AnalyticSurface& surface, double h);

struct AdmissibilityThresholds {
  double max_dist_factor = 1.0;   // max_dist  <= factor * h
  double diam_factor = 2.5;       // diam      <= factor * h
  double alpha_factor = 4.0;      // alpha_max <= min(factor * h, pi/2)
  double out_area_factor = 1.0;   // out_area  <= factor * h
};

struct AdmissibilityOptions {
  int subdivision = 4;            // interior samples per triangle = subdivision^2
  int edge_samples = 4;
  int hausdorff_samples = 10000;  // per side
  AdmissibilityThresholds thresholds;
};

struct AdmissibilityReport {
  double h = 0.0;
  double max_dist = 0.0;            // sup over mesh samples of d_X
  double alpha_max = 0.0;           // largest normal angle over in-samples
  double hausdorff_estimate = 0.0;  // sampled, both directions
  double out_area = 0.0;            // area projecting outside the surface
  double in_area = 0.0;
  double diam = 0.0;
  bool injectivity_ok = true;
  double out_area_ratio = 0.0;      // out_area / h
  bool pass_max_dist = false, pass_alpha = false, pass_out_area = false, pass_diam = false;
  bool pass_all = false;
};

AdmissibilityReport admissibility_report(const TriangleMesh& mesh, const AnalyticSurface& surface,
                                         double h, const AdmissibilityOptions& opts = {});

/// P1: vertex values are the signal at the projected (domain-clamped) foot.
/// P0: per-triangle mean of the three projected vertex values.
SignalP1 discretize_signal_p1(const AnalyticSurface& surface, const AnalyticSignal& f,
                              const TriangleMesh& mesh);
SignalP0 discretize_signal_p0(const AnalyticSurface& surface, const AnalyticSignal& f,
                              const TriangleMesh& mesh);
Eigen::VectorXd discretize_signal(const AnalyticSurface& surface, const AnalyticSignal& f,
                                  const TriangleMesh& mesh, ElementKind element);

/// Tensor Gauss rule over the parameter domain; weights carry the area
/// element, so sum(w_i * g(u_i,v_i)) integrates g over the surface.
struct SurfaceQuadrature {
  std::vector<double> u, v, w;
  std::size_t size() const { return u.size(); }
};

SurfaceQuadrature surface_quadrature(const AnalyticSurface& surface, int order_u, int order_v);

/// Tensor rule with the v-order scaled by the metric extent ratio of the two
/// parameter directions.
SurfaceQuadrature balanced_surface_quadrature(const AnalyticSurface& surface, int order);

/// Mesh signal transported to surface quadrature nodes by casting the normal
/// line of each node against the mesh. Nodes whose normal line misses the
/// mesh are flagged and their measure accumulated.
struct LiftedSignal {
  std::vector<double> values;
  std::vector<char> hit;
  double missed_measure = 0.0;
  double covered_measure = 0.0;
};

LiftedSignal lift_signal(const SignalP0& f, const AnalyticSurface& surface,
                         const SurfaceQuadrature& quad);
LiftedSignal lift_signal(const SignalP1& f, const AnalyticSurface& surface,
                         const SurfaceQuadrature& quad);

/// Integral of |a - b| over nodes where both lifts hit.
double lifted_l1_distance(const LiftedSignal& a, const LiftedSignal& b,
                          const SurfaceQuadrature& quad);
double lifted_l1_norm(const LiftedSignal& a, const SurfaceQuadrature& quad);

struct OracleOptions {
  int base_order = 16;    // >= 4; order in u, doubled in v for periodic spans
  int max_order = 96;
  double rel_tol = 1e-6;  // agreement between consecutive orders
};

/// ||mu_(X,f)||^2 in W' by tensor quadrature, refined until two consecutive
/// orders agree to rel_tol. Throws NoConvergence.
double continuous_varifold_norm2(const AnalyticSurface& surface, const AnalyticSignal& f,
                                 const KernelParams& kp, const OracleOptions& opts = {});

/// <mu_(X,f), nu> for a discrete target nu.
double continuous_cross_product(const AnalyticSurface& surface, const AnalyticSignal& f,
                                const DiscreteVarifold& nu, const KernelParams& kp,
                                const OracleOptions& opts = {});

/// Continuous energy of the analytic signal against a discrete target:
/// penalty by quadrature (signal derivatives by central differences in the
/// parameters) plus (gamma_w/2) ||mu_(X,f) - nu||^2.
double continuous_energy_oracle(const AnalyticSurface& surface, const AnalyticSignal& f,
                                const DiscreteVarifold& target, const EnergyModel& model,
                                const OracleOptions& opts = {});

/// Sample locations for the projection Jacobian diagnostic.
struct JacobianSample {
  int triangle = 0;
  double b1 = 1.0 / 3.0, b2 = 1.0 / 3.0, b3 = 1.0 / 3.0;
};

/// det D pi_X at mesh points: cos(alpha) / ((1+t_sign*d*k1)(1+t_sign*d*k2)).
std::vector<double> jacobian_diagnostic(const AnalyticSurface& surface, const TriangleMesh& mesh,
                                        const std::vector<JacobianSample>& samples);

struct RefinementLevel {
  double h = 0.0;
  std::shared_ptr<TriangleMesh> mesh;
};

/// Meshes for strictly decreasing h; optionally validated against
/// admissibility_report at each level.
struct RefinementFamily {
  std::vector<RefinementLevel> levels;
};

RefinementFamily make_refinement_family(const AnalyticSurface& surface,
                                        const std::vector<double>& hs, bool validate = false,
                                        const AdmissibilityOptions& opts = {});

}  // namespace fvmatch

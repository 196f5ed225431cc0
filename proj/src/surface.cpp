#include "fvmatch/surface.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Dense>

#include "fvmatch/parallel.hpp"

namespace fvmatch {

namespace {

double wrap_to_center(double angle, double center) {
  while (angle < center - M_PI) angle += 2.0 * M_PI;
  while (angle > center + M_PI) angle -= 2.0 * M_PI;
  return angle;
}

double clamp(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// base class

bool AnalyticSurface::param_inside(double u, double v, double tol) const {
  ParamRect d = domain();
  return u >= d.u0 - tol && u <= d.u1 + tol && v >= d.v0 - tol && v <= d.v1 + tol;
}

ClosestPoint AnalyticSurface::closest_point(const Vec3& p) const { return closest_point_newton(p); }

ClosestPoint AnalyticSurface::closest_point_newton(const Vec3& p) const {
  const ParamRect d = domain();
  const double tol = 1e-12 * reach();
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  const double us[2] = {d.u0 + 0.25 * (d.u1 - d.u0), d.u0 + 0.75 * (d.u1 - d.u0)};
  const double vs[2] = {d.v0 + 0.25 * (d.v1 - d.v0), d.v0 + 0.75 * (d.v1 - d.v0)};
  for (double u_start : us) {
    for (double v_start : vs) {
      double u = u_start, v = v_start;
      double g = 0.5 * (p - position(u, v)).squaredNorm();
      for (int iter = 0; iter < 80; ++iter) {
        const Vec3 r = position(u, v) - p;
        const Vec3 tu = tangent_u(u, v), tv = tangent_v(u, v);
        Eigen::Vector2d grad(r.dot(tu), r.dot(tv));
        // Hessian of 0.5|r|^2 by central differences of the gradient.
        const double eu = 1e-6 * (d.u1 - d.u0) + 1e-14;
        const double ev = 1e-6 * (d.v1 - d.v0) + 1e-14;
        auto grad_at = [&](double uu, double vv) {
          const Vec3 rr = position(uu, vv) - p;
          return Eigen::Vector2d(rr.dot(tangent_u(uu, vv)), rr.dot(tangent_v(uu, vv)));
        };
        Eigen::Matrix2d H;
        H.col(0) = (grad_at(u + eu, v) - grad_at(u - eu, v)) / (2.0 * eu);
        H.col(1) = (grad_at(u, v + ev) - grad_at(u, v - ev)) / (2.0 * ev);
        Eigen::Matrix2d Hs = 0.5 * (H + H.transpose());
        // Damp towards gradient descent when the Hessian is not positive.
        double lam = 0.0;
        Eigen::Vector2d step;
        for (int k = 0; k < 12; ++k) {
          Eigen::Matrix2d M = Hs + lam * Eigen::Matrix2d::Identity();
          if (M.determinant() > 1e-30) {
            step = M.ldlt().solve(-grad);
            if (step.dot(grad) < 0.0) break;
          }
          lam = (lam == 0.0) ? 1.0 : lam * 10.0;
        }
        double scale = 1.0;
        double un = u, vn = v, gn = g;
        for (int bt = 0; bt < 30; ++bt) {
          un = clamp(u + scale * step[0], d.u0, d.u1);
          vn = clamp(v + scale * step[1], d.v0, d.v1);
          gn = 0.5 * (p - position(un, vn)).squaredNorm();
          if (gn <= g) break;
          scale *= 0.5;
        }
        const double moved = std::hypot(un - u, vn - v);
        u = un;
        v = vn;
        g = gn;
        if (moved * (tangent_u(u, v).norm() + tangent_v(u, v).norm()) < tol) break;
      }
      const Vec3 foot = position(u, v);
      const double dist = (p - foot).norm();
      if (dist < best.distance) best = {u, v, foot, dist};
    }
  }
  return best;
}

Projection AnalyticSurface::project(const Vec3& p) const {
  const ClosestPoint cp = closest_point(p);
  const Vec3 n = normal(cp.u, cp.v);
  const double t = (p - cp.foot).dot(n);
  const double residual = (p - (cp.foot + t * n)).norm();
  if (residual > 1e-8 * reach())
    throw OutsideReach("point is outside the normal neighborhood (foot on the boundary)");
  if (std::abs(t) > reach())
    throw OutsideReach("point is outside the normal neighborhood (|t| > reach)");
  // the projection degenerates where an offset factor 1 + t*kappa vanishes
  const Eigen::Vector2d k = principal_curvatures(cp.u, cp.v);
  if (1.0 + t * k[0] <= 1e-12 || 1.0 + t * k[1] <= 1e-12)
    throw OutsideReach("point is at or beyond a focal point of the surface");
  return {cp.u, cp.v, cp.foot, t};
}

bool AnalyticSurface::in_normal_neighborhood(const Vec3& p) const {
  const ClosestPoint cp = closest_point(p);
  const Vec3 n = normal(cp.u, cp.v);
  const double t = (p - cp.foot).dot(n);
  if ((p - (cp.foot + t * n)).norm() > 1e-8 * reach()) return false;
  return std::abs(t) < reach();
}

// ---------------------------------------------------------------------------
// builtins

namespace {

class SphereCap final : public AnalyticSurface {
 public:
  SphereCap(double radius, double theta_max) : radius_(radius), theta_max_(theta_max) {
    if (!(radius > 0.0)) throw BadParams("sphere_cap: radius must be positive");
    if (!(theta_max > 0.0 && theta_max < M_PI))
      throw BadParams("sphere_cap: theta_max must lie in (0, pi)");
  }

  std::string name() const override { return "sphere_cap"; }
  ParamRect domain() const override { return {0.0, theta_max_, 0.0, 2.0 * M_PI}; }

  Vec3 position(double u, double v) const override {
    return radius_ * Vec3(std::sin(u) * std::cos(v), std::sin(u) * std::sin(v), std::cos(u));
  }
  Vec3 tangent_u(double u, double v) const override {
    return radius_ * Vec3(std::cos(u) * std::cos(v), std::cos(u) * std::sin(v), -std::sin(u));
  }
  Vec3 tangent_v(double u, double v) const override {
    return radius_ * Vec3(-std::sin(u) * std::sin(v), std::sin(u) * std::cos(v), 0.0);
  }
  Vec3 normal(double u, double v) const override {
    return Vec3(std::sin(u) * std::cos(v), std::sin(u) * std::sin(v), std::cos(u));
  }
  Eigen::Vector2d principal_curvatures(double, double) const override {
    return {1.0 / radius_, 1.0 / radius_};
  }
  double reach() const override { return radius_; }
  double area() const override { return 2.0 * M_PI * radius_ * radius_ * (1.0 - std::cos(theta_max_)); }

  ClosestPoint closest_point(const Vec3& p) const override {
    const double rho = p.norm();
    if (rho < 1e-300) {
      // center of the sphere; every direction ties, pick the pole
      return {0.0, 0.0, Vec3(0, 0, radius_), radius_};
    }
    double u = std::acos(clamp(p.z() / rho, -1.0, 1.0));
    double v = std::atan2(p.y(), p.x());
    if (v < 0.0) v += 2.0 * M_PI;
    u = clamp(u, 0.0, theta_max_);
    const Vec3 foot = position(u, v);
    return {u, v, foot, (p - foot).norm()};
  }

 private:
  double radius_, theta_max_;
};

class CylinderPatch final : public AnalyticSurface {
 public:
  CylinderPatch(double radius, double u0, double u1, double v0, double v1)
      : radius_(radius), rect_{u0, u1, v0, v1} {
    if (!(radius > 0.0)) throw BadParams("cylinder_patch: radius must be positive");
    if (!(u1 > u0 && u1 - u0 < 2.0 * M_PI))
      throw BadParams("cylinder_patch: azimuth range must be nonempty and below 2*pi");
    if (!(v1 > v0)) throw BadParams("cylinder_patch: height range must be nonempty");
  }

  std::string name() const override { return "cylinder_patch"; }
  ParamRect domain() const override { return rect_; }

  Vec3 position(double u, double v) const override {
    return Vec3(radius_ * std::cos(u), radius_ * std::sin(u), v);
  }
  Vec3 tangent_u(double u, double) const override {
    return Vec3(-radius_ * std::sin(u), radius_ * std::cos(u), 0.0);
  }
  Vec3 tangent_v(double, double) const override { return Vec3(0, 0, 1); }
  Vec3 normal(double u, double) const override { return Vec3(std::cos(u), std::sin(u), 0.0); }
  Eigen::Vector2d principal_curvatures(double, double) const override {
    return {1.0 / radius_, 0.0};
  }
  double reach() const override { return radius_; }
  double area() const override { return radius_ * (rect_.u1 - rect_.u0) * (rect_.v1 - rect_.v0); }

  ClosestPoint closest_point(const Vec3& p) const override {
    double u;
    const double r_xy = std::hypot(p.x(), p.y());
    if (r_xy < 1e-300) {
      u = 0.5 * (rect_.u0 + rect_.u1);  // on the axis; any azimuth ties
    } else {
      u = wrap_to_center(std::atan2(p.y(), p.x()), 0.5 * (rect_.u0 + rect_.u1));
    }
    u = clamp(u, rect_.u0, rect_.u1);
    const double v = clamp(p.z(), rect_.v0, rect_.v1);
    const Vec3 foot = position(u, v);
    return {u, v, foot, (p - foot).norm()};
  }

 private:
  double radius_;
  ParamRect rect_;
};

class MongePatch final : public AnalyticSurface {
 public:
  MongePatch(ParamRect rect, double amp, double kx, double ky)
      : rect_(rect), amp_(amp), kx_(kx), ky_(ky) {
    if (!(rect.u1 > rect.u0 && rect.v1 > rect.v0))
      throw BadParams("monge_patch: parameter domain must be nonempty");
    if (amp_ == 0.0) {
      reach_ = 1e6 * std::max(1.0, std::hypot(rect.u1 - rect.u0, rect.v1 - rect.v0));
    } else {
      double kmax = 0.0;
      const int n = 33;
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
          double u = rect.u0 + (rect.u1 - rect.u0) * i / n;
          double v = rect.v0 + (rect.v1 - rect.v0) * j / n;
          Eigen::Vector2d k = principal_curvatures(u, v);
          kmax = std::max({kmax, std::abs(k[0]), std::abs(k[1])});
        }
      reach_ = 0.5 / std::max(kmax, 1e-12);
    }
  }

  std::string name() const override { return "monge_patch"; }
  ParamRect domain() const override { return rect_; }

  double height(double u, double v) const { return amp_ * std::sin(kx_ * u) * std::sin(ky_ * v); }

  Vec3 position(double u, double v) const override { return Vec3(u, v, height(u, v)); }
  Vec3 tangent_u(double u, double v) const override {
    return Vec3(1.0, 0.0, amp_ * kx_ * std::cos(kx_ * u) * std::sin(ky_ * v));
  }
  Vec3 tangent_v(double u, double v) const override {
    return Vec3(0.0, 1.0, amp_ * ky_ * std::sin(kx_ * u) * std::cos(ky_ * v));
  }
  Vec3 normal(double u, double v) const override {
    Vec3 n = tangent_u(u, v).cross(tangent_v(u, v));
    return n / n.norm();
  }

  Eigen::Vector2d principal_curvatures(double u, double v) const override {
    const double zu = amp_ * kx_ * std::cos(kx_ * u) * std::sin(ky_ * v);
    const double zv = amp_ * ky_ * std::sin(kx_ * u) * std::cos(ky_ * v);
    const double zuu = -amp_ * kx_ * kx_ * std::sin(kx_ * u) * std::sin(ky_ * v);
    const double zvv = -amp_ * ky_ * ky_ * std::sin(kx_ * u) * std::sin(ky_ * v);
    const double zuv = amp_ * kx_ * ky_ * std::cos(kx_ * u) * std::cos(ky_ * v);
    const double w = std::sqrt(1.0 + zu * zu + zv * zv);
    Eigen::Matrix2d first;
    first << 1.0 + zu * zu, zu * zv, zu * zv, 1.0 + zv * zv;
    Eigen::Matrix2d second;
    second << zuu / w, zuv / w, zuv / w, zvv / w;
    // Gauss-map differential = -(shape operator of the upward normal)
    Eigen::Matrix2d s = -(first.inverse() * second);
    Eigen::EigenSolver<Eigen::Matrix2d> es(s);
    return {es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
  }

  double reach() const override { return reach_; }

  double area() const override {
    if (amp_ == 0.0) return (rect_.u1 - rect_.u0) * (rect_.v1 - rect_.v0);
    GaussRule1D gu = gauss_legendre(48, rect_.u0, rect_.u1);
    GaussRule1D gv = gauss_legendre(48, rect_.v0, rect_.v1);
    double a = 0.0;
    for (std::size_t i = 0; i < gu.nodes.size(); ++i)
      for (std::size_t j = 0; j < gv.nodes.size(); ++j)
        a += gu.weights[i] * gv.weights[j] *
             tangent_u(gu.nodes[i], gv.nodes[j]).cross(tangent_v(gu.nodes[i], gv.nodes[j])).norm();
    return a;
  }

  ClosestPoint closest_point(const Vec3& p) const override {
    if (amp_ == 0.0) {
      const double u = clamp(p.x(), rect_.u0, rect_.u1);
      const double v = clamp(p.y(), rect_.v0, rect_.v1);
      const Vec3 foot(u, v, 0.0);
      return {u, v, foot, (p - foot).norm()};
    }
    return closest_point_newton(p);
  }

 private:
  ParamRect rect_;
  double amp_, kx_, ky_;
  double reach_ = 0.0;
};

/// Rigid translation of a base surface; normals and curvatures are unchanged.
class TranslatedSurface final : public AnalyticSurface {
 public:
  TranslatedSurface(std::shared_ptr<AnalyticSurface> base, const Vec3& offset)
      : base_(std::move(base)), offset_(offset) {}

  std::string name() const override { return base_->name(); }
  ParamRect domain() const override { return base_->domain(); }
  Vec3 position(double u, double v) const override { return base_->position(u, v) + offset_; }
  Vec3 tangent_u(double u, double v) const override { return base_->tangent_u(u, v); }
  Vec3 tangent_v(double u, double v) const override { return base_->tangent_v(u, v); }
  Vec3 normal(double u, double v) const override { return base_->normal(u, v); }
  Eigen::Vector2d principal_curvatures(double u, double v) const override {
    return base_->principal_curvatures(u, v);
  }
  double reach() const override { return base_->reach(); }
  double area() const override { return base_->area(); }
  ClosestPoint closest_point(const Vec3& p) const override {
    ClosestPoint cp = base_->closest_point(p - offset_);
    cp.foot += offset_;
    return cp;
  }

 private:
  std::shared_ptr<AnalyticSurface> base_;
  Vec3 offset_;
};

}  // namespace

std::shared_ptr<AnalyticSurface> builtin_surface(const std::string& name,
                                                 const std::map<std::string, double>& params) {
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"sphere_cap", {"radius", "theta_max"}},
      {"cylinder_patch", {"radius", "u0", "u1", "v0", "v1"}},
      {"monge_patch", {"x0", "x1", "y0", "y1", "amp", "kx", "ky"}},
  };
  if (auto it = allowed.find(name); it != allowed.end()) {
    for (const auto& [key, value] : params) {
      if (key == "tx" || key == "ty" || key == "tz") continue;
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw BadParams("surface '" + name + "' does not take a parameter '" + key + "'");
    }
  }
  std::shared_ptr<AnalyticSurface> s;
  if (name == "sphere_cap") {
    s = std::make_shared<SphereCap>(get_param(params, "radius", 1.0),
                                    get_param(params, "theta_max", M_PI / 3.0));
  } else if (name == "cylinder_patch") {
    s = std::make_shared<CylinderPatch>(
        get_param(params, "radius", 1.0), get_param(params, "u0", -M_PI / 3.0),
        get_param(params, "u1", M_PI / 3.0), get_param(params, "v0", 0.0),
        get_param(params, "v1", 1.0));
  } else if (name == "monge_patch") {
    ParamRect rect{get_param(params, "x0", 0.0), get_param(params, "x1", 1.0),
                   get_param(params, "y0", 0.0), get_param(params, "y1", 1.0)};
    s = std::make_shared<MongePatch>(rect, get_param(params, "amp", 0.0),
                                     get_param(params, "kx", M_PI), get_param(params, "ky", M_PI));
  } else {
    throw BadParams("unknown surface '" + name +
                    "' (expected sphere_cap, cylinder_patch, or monge_patch)");
  }
  const Vec3 offset(get_param(params, "tx", 0.0), get_param(params, "ty", 0.0),
                    get_param(params, "tz", 0.0));
  if (offset.squaredNorm() > 0.0) s = std::make_shared<TranslatedSurface>(s, offset);
  return s;
}

// ---------------------------------------------------------------------------
// sampling

namespace {

TriangleMesh sample_sphere_cap(const AnalyticSurface& surface, double h) {
  const ParamRect d = surface.domain();
  const double theta_max = d.u1;
  const double radius = surface.reach();
  const int m = std::max(2, static_cast<int>(std::round(radius * theta_max / h)));
  const double du = theta_max / m;
  const double overhang = 0.5 * (h / radius) * (h / radius);  // angular offset past the rim

  std::vector<Vec3> vertices;
  std::vector<int> ring_start(static_cast<std::size_t>(m + 1), 0);
  vertices.push_back(surface.position(0.0, 0.0));  // pole
  for (int i = 1; i <= m; ++i) {
    ring_start[static_cast<std::size_t>(i)] = static_cast<int>(vertices.size());
    const double u = (i < m) ? i * du : std::min(theta_max + overhang, 0.5 * (theta_max + M_PI));
    const int n_i = 6 * i;
    for (int j = 0; j < n_i; ++j) vertices.push_back(surface.position(u, 2.0 * M_PI * j / n_i));
  }

  std::vector<std::array<int, 3>> triangles;
  for (int j = 0; j < 6; ++j)
    triangles.push_back({ring_start[1] + j, ring_start[1] + (j + 1) % 6, 0});
  for (int i = 1; i < m; ++i) {
    const int inner = ring_start[static_cast<std::size_t>(i)];
    const int outer = ring_start[static_cast<std::size_t>(i + 1)];
    const int n_in = 6 * i, n_out = 6 * (i + 1);
    for (int s = 0; s < 6; ++s) {
      for (int t = 0; t <= i; ++t) {
        int b0 = outer + (s * (i + 1) + t) % n_out;
        int b1 = outer + (s * (i + 1) + t + 1) % n_out;
        int a0 = inner + (s * i + t) % n_in;
        triangles.push_back({b0, b1, a0});
        if (t < i) {
          int a1 = inner + (s * i + t + 1) % n_in;
          triangles.push_back({a0, b1, a1});
        }
      }
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh sample_grid_patch(const AnalyticSurface& surface, double h) {
  const ParamRect d = surface.domain();
  // metric scale per direction, sampled
  double su = 0.0, sv = 0.0;
  const int ns = 17;
  for (int i = 0; i <= ns; ++i)
    for (int j = 0; j <= ns; ++j) {
      const double u = d.u0 + (d.u1 - d.u0) * i / ns;
      const double v = d.v0 + (d.v1 - d.v0) * j / ns;
      su = std::max(su, surface.tangent_u(u, v).norm());
      sv = std::max(sv, surface.tangent_v(u, v).norm());
    }
  const int nu = std::max(1, static_cast<int>(std::round((d.u1 - d.u0) * su / h)));
  const int nv = std::max(1, static_cast<int>(std::round((d.v1 - d.v0) * sv / h)));
  const double du = (d.u1 - d.u0) / nu, dv = (d.v1 - d.v0) / nv;
  const double pad_u = 0.5 * h * h / su, pad_v = 0.5 * h * h / sv;  // overhang past the boundary

  // columns: one padded column, the on-domain grid, one padded column
  std::vector<double> us(static_cast<std::size_t>(nu + 3));
  std::vector<double> vs(static_cast<std::size_t>(nv + 3));
  us.front() = d.u0 - pad_u;
  for (int i = 0; i <= nu; ++i) us[static_cast<std::size_t>(i + 1)] = d.u0 + i * du;
  us.back() = d.u1 + pad_u;
  vs.front() = d.v0 - pad_v;
  for (int j = 0; j <= nv; ++j) vs[static_cast<std::size_t>(j + 1)] = d.v0 + j * dv;
  vs.back() = d.v1 + pad_v;

  const int cols = static_cast<int>(us.size());
  const int rows = static_cast<int>(vs.size());
  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(cols * rows));
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < rows; ++j)
      vertices.push_back(surface.position(us[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)]));

  auto id = [rows](int i, int j) { return i * rows + j; };
  std::vector<std::array<int, 3>> triangles;
  for (int i = 0; i + 1 < cols; ++i)
    for (int j = 0; j + 1 < rows; ++j) {
      if ((i + j) % 2 == 0) {
        triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        triangles.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        triangles.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

}  // namespace

TriangleMesh sample_triangulation(const AnalyticSurface& surface, double h) {
  if (!(h > 0.0)) throw BadStep("sample_triangulation requires h > 0");
  if (!(h < surface.reach() / 2.0))
    throw BadStep("sample_triangulation requires h < reach/2");
  if (surface.name() == "sphere_cap") return sample_sphere_cap(surface, h);
  return sample_grid_patch(surface, h);
}

// ---------------------------------------------------------------------------
// admissibility

namespace {

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson-style closest point on triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

struct SampleClassification {
  bool inside = false;   // in the normal neighborhood
  double distance = 0.0; // d_X(p), clamped closest-point distance otherwise
  double angle = 0.0;    // normal angle when inside
  Vec3 foot = Vec3::Zero();
};

SampleClassification classify(const AnalyticSurface& surface, const Vec3& p,
                              const Vec3& mesh_normal) {
  SampleClassification out;
  const ClosestPoint cp = surface.closest_point(p);
  out.distance = cp.distance;
  out.foot = cp.foot;
  const Vec3 n = surface.normal(cp.u, cp.v);
  const double t = (p - cp.foot).dot(n);
  const bool normal_offset = (p - (cp.foot + t * n)).norm() <= 1e-8 * surface.reach();
  out.inside = normal_offset && std::abs(t) < surface.reach();
  if (out.inside && mesh_normal.squaredNorm() > 0.0) {
    const double c = clamp(std::abs(mesh_normal.dot(n)), 0.0, 1.0);
    out.angle = std::acos(c);
  }
  return out;
}

}  // namespace

AdmissibilityReport admissibility_report(const TriangleMesh& mesh, const AnalyticSurface& surface,
                                         double h, const AdmissibilityOptions& opts) {
  AdmissibilityReport rep;
  rep.h = h;
  rep.diam = mesh.num_triangles() > 0 ? mesh_diameter(mesh) : 0.0;

  const int s = std::max(1, opts.subdivision);
  const int nt = mesh.num_triangles();

  struct TriResult {
    double out_area = 0.0;
    double max_dist = 0.0;
    double alpha = 0.0;
    std::vector<Vec3> feet;
    std::vector<Vec3> points;
  };
  std::vector<TriResult> results(static_cast<std::size_t>(nt));

  parallel_for(nt, [&](std::int64_t k) {
    TriResult& r = results[static_cast<std::size_t>(k)];
    const Vec3& v1 = mesh.triangle_vertex(static_cast<int>(k), 0);
    const Vec3& v2 = mesh.triangle_vertex(static_cast<int>(k), 1);
    const Vec3& v3 = mesh.triangle_vertex(static_cast<int>(k), 2);
    const TriangleGeometry& g = mesh.raw_geometry(static_cast<int>(k));
    const double fragment = g.area / (s * s);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s - i; ++j) {
        // centroids of the upward and (when present) downward children
        for (int up = 0; up < (j < s - i - 1 ? 2 : 1); ++up) {
          double b2, b3;
          if (up == 0) {
            b2 = (i + 1.0 / 3.0) / s;
            b3 = (j + 1.0 / 3.0) / s;
          } else {
            b2 = (i + 2.0 / 3.0) / s;
            b3 = (j + 2.0 / 3.0) / s;
          }
          const Vec3 p = (1.0 - b2 - b3) * v1 + b2 * v2 + b3 * v3;
          const SampleClassification c = classify(surface, p, g.unit_normal);
          r.max_dist = std::max(r.max_dist, c.distance);
          if (c.inside) {
            r.alpha = std::max(r.alpha, c.angle);
            r.feet.push_back(c.foot);
            r.points.push_back(p);
          } else {
            r.out_area += fragment;
          }
        }
      }
    }
  });

  double total = 0.0;
  for (int k = 0; k < nt; ++k) {
    const TriResult& r = results[static_cast<std::size_t>(k)];
    rep.out_area += r.out_area;
    rep.max_dist = std::max(rep.max_dist, r.max_dist);
    rep.alpha_max = std::max(rep.alpha_max, r.alpha);
    total += mesh.raw_geometry(k).area;
  }
  rep.in_area = total - rep.out_area;

  // edge samples: the angle of Def. angle takes the worst adjacent triangle
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int k = 0; k < nt; ++k) {
    const auto& t = mesh.triangle(k);
    for (int i = 0; i < 3; ++i) {
      auto key = std::minmax(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>((i + 1) % 3)]);
      edge_tris[key].push_back(k);
    }
  }
  for (const auto& [edge, tris] : edge_tris) {
    const Vec3& a = mesh.vertex(edge.first);
    const Vec3& b = mesh.vertex(edge.second);
    for (int q = 1; q <= opts.edge_samples; ++q) {
      const double w = static_cast<double>(q) / (opts.edge_samples + 1);
      const Vec3 p = (1.0 - w) * a + w * b;
      double worst = -1.0;
      bool inside = false;
      for (int k : tris) {
        const SampleClassification c = classify(surface, p, mesh.raw_geometry(k).unit_normal);
        rep.max_dist = std::max(rep.max_dist, c.distance);
        if (c.inside) {
          inside = true;
          worst = std::max(worst, c.angle);
        }
      }
      if (inside) rep.alpha_max = std::max(rep.alpha_max, worst);
    }
  }

  // Hausdorff estimate: mesh->surface from the samples above, surface->mesh
  // from a stratified parameter grid.
  double mesh_to_surface = rep.max_dist;
  const int grid = std::max(2, static_cast<int>(std::round(std::sqrt(double(opts.hausdorff_samples)))));
  const ParamRect dom = surface.domain();
  std::vector<double> d_surf(static_cast<std::size_t>(grid * grid));
  parallel_for(grid * grid, [&](std::int64_t idx) {
    const int i = static_cast<int>(idx) / grid;
    const int j = static_cast<int>(idx) % grid;
    const double u = dom.u0 + (dom.u1 - dom.u0) * (i + 0.5) / grid;
    const double v = dom.v0 + (dom.v1 - dom.v0) * (j + 0.5) / grid;
    const Vec3 p = surface.position(u, v);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < nt; ++k) {
      best = std::min(best, point_triangle_distance(p, mesh.triangle_vertex(k, 0),
                                                    mesh.triangle_vertex(k, 1),
                                                    mesh.triangle_vertex(k, 2)));
    }
    d_surf[static_cast<std::size_t>(idx)] = best;
  });
  double surface_to_mesh = 0.0;
  for (double d : d_surf) surface_to_mesh = std::max(surface_to_mesh, d);
  rep.hausdorff_estimate = std::max(mesh_to_surface, surface_to_mesh);

  // sampled injectivity: distant samples must not share a foot
  {
    const double cell = std::max(h, 1e-12);
    const double foot_tol = 0.05 * h;
    const double point_sep = 0.5 * h;
    std::unordered_map<std::int64_t, std::vector<std::pair<Vec3, Vec3>>> grid_hash;
    auto key_of = [&](const Vec3& q) {
      auto cc = [&](double x) { return static_cast<std::int64_t>(std::floor(x / cell)); };
      return (cc(q.x()) * 73856093) ^ (cc(q.y()) * 19349663) ^ (cc(q.z()) * 83492791);
    };
    rep.injectivity_ok = true;
    for (const auto& r : results) {
      for (std::size_t i = 0; i < r.feet.size() && rep.injectivity_ok; ++i) {
        const Vec3& foot = r.feet[i];
        const Vec3& pt = r.points[i];
        for (int dx = -1; dx <= 1 && rep.injectivity_ok; ++dx)
          for (int dy = -1; dy <= 1 && rep.injectivity_ok; ++dy)
            for (int dz = -1; dz <= 1 && rep.injectivity_ok; ++dz) {
              const Vec3 shifted = foot + cell * Vec3(dx, dy, dz);
              auto it = grid_hash.find(key_of(shifted));
              if (it == grid_hash.end()) continue;
              for (const auto& [other_foot, other_pt] : it->second) {
                if ((other_foot - foot).norm() <= foot_tol && (other_pt - pt).norm() >= point_sep) {
                  rep.injectivity_ok = false;
                  break;
                }
              }
            }
        grid_hash[key_of(foot)].push_back({foot, pt});
      }
    }
  }

  rep.out_area_ratio = rep.out_area / h;
  rep.pass_max_dist = rep.max_dist <= opts.thresholds.max_dist_factor * h;
  rep.pass_diam = rep.diam <= opts.thresholds.diam_factor * h;
  rep.pass_alpha = rep.alpha_max <= std::min(opts.thresholds.alpha_factor * h, M_PI / 2.0);
  rep.pass_out_area = rep.out_area <= opts.thresholds.out_area_factor * h;
  rep.pass_all = rep.pass_max_dist && rep.pass_diam && rep.pass_alpha && rep.pass_out_area &&
                 rep.injectivity_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// signals

namespace {

double clamped_signal_at(const AnalyticSurface& surface, const AnalyticSignal& f, const Vec3& p) {
  const ClosestPoint cp = surface.closest_point(p);
  return f(cp.u, cp.v);
}

}  // namespace

SignalP1 discretize_signal_p1(const AnalyticSurface& surface, const AnalyticSignal& f,
                              const TriangleMesh& mesh) {
  Eigen::VectorXd values(mesh.num_vertices());
  parallel_for(mesh.num_vertices(), [&](std::int64_t i) {
    values[static_cast<Eigen::Index>(i)] =
        clamped_signal_at(surface, f, mesh.vertex(static_cast<int>(i)));
  });
  return SignalP1(mesh, std::move(values));
}

SignalP0 discretize_signal_p0(const AnalyticSurface& surface, const AnalyticSignal& f,
                              const TriangleMesh& mesh) {
  SignalP1 vertex_values = discretize_signal_p1(surface, f, mesh);
  return p0_project(vertex_values);
}

Eigen::VectorXd discretize_signal(const AnalyticSurface& surface, const AnalyticSignal& f,
                                  const TriangleMesh& mesh, ElementKind element) {
  if (element == ElementKind::P0) return discretize_signal_p0(surface, f, mesh).values;
  return discretize_signal_p1(surface, f, mesh).values;
}

// ---------------------------------------------------------------------------
// quadrature & lifting

SurfaceQuadrature surface_quadrature(const AnalyticSurface& surface, int order_u, int order_v) {
  if (order_u < 1 || order_v < 1) throw BadParams("surface_quadrature requires positive orders");
  const ParamRect d = surface.domain();
  const GaussRule1D gu = gauss_legendre(order_u, d.u0, d.u1);
  const GaussRule1D gv = gauss_legendre(order_v, d.v0, d.v1);
  SurfaceQuadrature q;
  q.u.reserve(gu.nodes.size() * gv.nodes.size());
  for (std::size_t i = 0; i < gu.nodes.size(); ++i) {
    for (std::size_t j = 0; j < gv.nodes.size(); ++j) {
      const double u = gu.nodes[i], v = gv.nodes[j];
      const double jac = surface.tangent_u(u, v).cross(surface.tangent_v(u, v)).norm();
      q.u.push_back(u);
      q.v.push_back(v);
      q.w.push_back(gu.weights[i] * gv.weights[j] * jac);
    }
  }
  return q;
}

namespace {

struct RayHit {
  bool found = false;
  int triangle = -1;
  double t = 0.0;
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

RayHit cast_normal_line(const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir,
                        double t_limit) {
  RayHit best;
  const double bary_tol = 1e-10;
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    const Vec3& a = mesh.triangle_vertex(k, 0);
    const Vec3& b = mesh.triangle_vertex(k, 1);
    const Vec3& c = mesh.triangle_vertex(k, 2);
    Eigen::Matrix3d m;
    m.col(0) = b - a;
    m.col(1) = c - a;
    m.col(2) = -dir;
    const double det = m.determinant();
    if (std::abs(det) < 1e-300) continue;
    const Vec3 sol = m.partialPivLu().solve(origin - a);
    const double b2 = sol[0], b3 = sol[1], t = sol[2];
    if (b2 < -bary_tol || b3 < -bary_tol || b2 + b3 > 1.0 + bary_tol) continue;
    if (std::abs(t) >= t_limit) continue;
    if (!best.found || std::abs(t) < std::abs(best.t)) {
      best = {true, k, t, 1.0 - b2 - b3, b2, b3};
    }
  }
  return best;
}

template <class Eval>
LiftedSignal lift_impl(const TriangleMesh& mesh, const AnalyticSurface& surface,
                       const SurfaceQuadrature& quad, Eval&& eval) {
  LiftedSignal out;
  const std::size_t n = quad.size();
  out.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.hit.assign(n, 0);
  parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    const Vec3 origin = surface.position(quad.u[idx], quad.v[idx]);
    const Vec3 dir = surface.normal(quad.u[idx], quad.v[idx]);
    const RayHit hit = cast_normal_line(mesh, origin, dir, surface.reach());
    if (hit.found) {
      out.hit[idx] = 1;
      out.values[idx] = eval(hit);
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    (out.hit[i] ? out.covered_measure : out.missed_measure) += quad.w[i];
  return out;
}

}  // namespace

LiftedSignal lift_signal(const SignalP0& f, const AnalyticSurface& surface,
                         const SurfaceQuadrature& quad) {
  return lift_impl(*f.mesh, surface, quad, [&](const RayHit& h) { return f.values[h.triangle]; });
}

LiftedSignal lift_signal(const SignalP1& f, const AnalyticSurface& surface,
                         const SurfaceQuadrature& quad) {
  return lift_impl(*f.mesh, surface, quad,
                   [&](const RayHit& h) { return eval_p1(f, h.triangle, h.b1, h.b2, h.b3); });
}

double lifted_l1_distance(const LiftedSignal& a, const LiftedSignal& b,
                          const SurfaceQuadrature& quad) {
  if (a.values.size() != quad.size() || b.values.size() != quad.size())
    throw LengthMismatch("lifted signals do not match the quadrature rule");
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i)
    if (a.hit[i] && b.hit[i]) sum += quad.w[i] * std::abs(a.values[i] - b.values[i]);
  return sum;
}

double lifted_l1_norm(const LiftedSignal& a, const SurfaceQuadrature& quad) {
  if (a.values.size() != quad.size())
    throw LengthMismatch("lifted signal does not match the quadrature rule");
  double sum = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i)
    if (a.hit[i]) sum += quad.w[i] * std::abs(a.values[i]);
  return sum;
}

// ---------------------------------------------------------------------------
// continuous oracles

SurfaceQuadrature balanced_surface_quadrature(const AnalyticSurface& surface, int order) {
  const ParamRect d = surface.domain();
  double su = 0.0, sv = 0.0;
  const int ns = 9;
  for (int i = 0; i <= ns; ++i)
    for (int j = 0; j <= ns; ++j) {
      const double u = d.u0 + (d.u1 - d.u0) * i / ns;
      const double v = d.v0 + (d.v1 - d.v0) * j / ns;
      su = std::max(su, surface.tangent_u(u, v).norm());
      sv = std::max(sv, surface.tangent_v(u, v).norm());
    }
  const double lu = (d.u1 - d.u0) * su, lv = (d.v1 - d.v0) * sv;
  const int order_v = std::min(
      600, std::max(4, static_cast<int>(std::round(order * (lv / std::max(lu, 1e-12))))));
  return surface_quadrature(surface, order, order_v);
}

namespace {

struct OracleNodes {
  SurfaceQuadrature quad;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> signals;
};

OracleNodes oracle_nodes(const AnalyticSurface& surface, const AnalyticSignal& f, int order) {
  OracleNodes nodes;
  nodes.quad = balanced_surface_quadrature(surface, order);
  const std::size_t n = nodes.quad.size();
  nodes.points.resize(n);
  nodes.normals.resize(n);
  nodes.signals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes.points[i] = surface.position(nodes.quad.u[i], nodes.quad.v[i]);
    nodes.normals[i] = surface.normal(nodes.quad.u[i], nodes.quad.v[i]);
    nodes.signals[i] = f(nodes.quad.u[i], nodes.quad.v[i]);
  }
  return nodes;
}

double pair_value(double wa, const Vec3& xa, const Vec3& na, double fa, double wb, const Vec3& xb,
                  const Vec3& nb, double fb, const KernelParams& kp) {
  const double d2 = (xa - xb).squaredNorm();
  const double dot = na.dot(nb);
  const double df = fa - fb;
  const double ke = std::exp(-d2 / (kp.sigma_e * kp.sigma_e));
  const double kt = std::exp(-2.0 * (1.0 - dot * dot) / (kp.sigma_t * kp.sigma_t));
  const double kf = std::exp(-df * df / (kp.sigma_f * kp.sigma_f));
  return (wa * wb) * (ke * kt) * kf;
}

double norm2_at(const OracleNodes& nodes, const KernelParams& kp) {
  const auto n = static_cast<std::int64_t>(nodes.quad.size());
  return parallel_sum(n, [&](std::int64_t i) {
    const auto a = static_cast<std::size_t>(i);
    double row = 0.0;
    for (std::size_t b = 0; b < nodes.quad.size(); ++b)
      row += pair_value(nodes.quad.w[a], nodes.points[a], nodes.normals[a], nodes.signals[a],
                        nodes.quad.w[b], nodes.points[b], nodes.normals[b], nodes.signals[b], kp);
    return row;
  });
}

double cross_at(const OracleNodes& nodes, const DiscreteVarifold& nu, const KernelParams& kp) {
  const auto n = static_cast<std::int64_t>(nodes.quad.size());
  return parallel_sum(n, [&](std::int64_t i) {
    const auto a = static_cast<std::size_t>(i);
    double row = 0.0;
    for (const VarifoldAtom& b : nu.atoms)
      row += pair_value(nodes.quad.w[a], nodes.points[a], nodes.normals[a], nodes.signals[a],
                        b.weight, b.point, b.normal, b.signal, kp);
    return row;
  });
}

double penalty_at(const AnalyticSurface& surface, const AnalyticSignal& f,
                  const EnergyModel& model, const OracleNodes& nodes) {
  const ParamRect d = surface.domain();
  const double eu = 1e-5 * (d.u1 - d.u0), ev = 1e-5 * (d.v1 - d.v0);
  double volume = 0.0, grad = 0.0;
  for (std::size_t i = 0; i < nodes.quad.size(); ++i) {
    const double u = nodes.quad.u[i], v = nodes.quad.v[i], w = nodes.quad.w[i];
    const double val = nodes.signals[i];
    switch (model.variant) {
      case ModelVariant::L2:
        volume += w * val * val;
        break;
      case ModelVariant::H1:
      case ModelVariant::BV: {
        const double fu = (f(u + eu, v) - f(u - eu, v)) / (2.0 * eu);
        const double fv = (f(u, v + ev) - f(u, v - ev)) / (2.0 * ev);
        const Vec3 tu = surface.tangent_u(u, v), tv = surface.tangent_v(u, v);
        Eigen::Matrix2d metric;
        metric << tu.dot(tu), tu.dot(tv), tu.dot(tv), tv.dot(tv);
        const Eigen::Vector2d df(fu, fv);
        const double grad2 = df.dot(metric.inverse() * df);
        if (model.variant == ModelVariant::H1) {
          volume += w * val * val;
          grad += w * grad2;
        } else {
          volume += w * std::sqrt(val * val + model.epsilon * model.epsilon);
          grad += w * std::sqrt(grad2 + model.epsilon * model.epsilon);
        }
        break;
      }
    }
  }
  if (model.variant == ModelVariant::L2) return 0.5 * model.alpha * volume;
  return model.alpha * volume + model.beta * grad;
}

}  // namespace

double continuous_varifold_norm2(const AnalyticSurface& surface, const AnalyticSignal& f,
                                 const KernelParams& kp, const OracleOptions& opts) {
  if (opts.base_order < 4) throw BadParams("oracle quadrature order must be >= 4");
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int order = opts.base_order; order <= opts.max_order;
       order = std::max(order + 2, static_cast<int>(std::round(order * 1.4)))) {
    const double value = norm2_at(oracle_nodes(surface, f, order), kp);
    if (std::isfinite(prev) &&
        std::abs(value - prev) <= opts.rel_tol * std::max({std::abs(value), std::abs(prev), 1e-300}))
      return value;
    prev = value;
  }
  throw NoConvergence("continuous varifold norm did not converge within the order budget");
}

double continuous_cross_product(const AnalyticSurface& surface, const AnalyticSignal& f,
                                const DiscreteVarifold& nu, const KernelParams& kp,
                                const OracleOptions& opts) {
  if (opts.base_order < 4) throw BadParams("oracle quadrature order must be >= 4");
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int order = opts.base_order; order <= opts.max_order;
       order = std::max(order + 2, static_cast<int>(std::round(order * 1.4)))) {
    const double value = cross_at(oracle_nodes(surface, f, order), nu, kp);
    if (std::isfinite(prev) &&
        std::abs(value - prev) <= opts.rel_tol * std::max({std::abs(value), std::abs(prev), 1e-300}))
      return value;
    prev = value;
  }
  throw NoConvergence("continuous cross product did not converge within the order budget");
}

double continuous_energy_oracle(const AnalyticSurface& surface, const AnalyticSignal& f,
                                const DiscreteVarifold& target, const EnergyModel& model,
                                const OracleOptions& opts) {
  if (opts.base_order < 4) throw BadParams("oracle quadrature order must be >= 4");
  model.validate();
  const double nu_norm2 =
      model.gamma_w > 0.0 ? inner_product(target, target, model.kernel) : 0.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int order = opts.base_order; order <= opts.max_order;
       order = std::max(order + 2, static_cast<int>(std::round(order * 1.4)))) {
    const OracleNodes nodes = oracle_nodes(surface, f, order);
    double value = penalty_at(surface, f, model, nodes);
    if (model.gamma_w > 0.0) {
      const double mu2 = norm2_at(nodes, model.kernel);
      const double cross = cross_at(nodes, target, model.kernel);
      value += 0.5 * model.gamma_w * (mu2 - 2.0 * cross + nu_norm2);
    }
    if (std::isfinite(prev) &&
        std::abs(value - prev) <= opts.rel_tol * std::max({std::abs(value), std::abs(prev), 1e-300}))
      return value;
    prev = value;
  }
  throw NoConvergence("continuous energy oracle did not converge within the order budget");
}

// ---------------------------------------------------------------------------
// jacobian diagnostic & refinement families

std::vector<double> jacobian_diagnostic(const AnalyticSurface& surface, const TriangleMesh& mesh,
                                        const std::vector<JacobianSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const JacobianSample& s : samples) {
    const Vec3 p = s.b1 * mesh.triangle_vertex(s.triangle, 0) +
                   s.b2 * mesh.triangle_vertex(s.triangle, 1) +
                   s.b3 * mesh.triangle_vertex(s.triangle, 2);
    const Projection proj = surface.project(p);
    const Vec3 n = surface.normal(proj.u, proj.v);
    const Vec3 mesh_n = mesh.raw_geometry(s.triangle).unit_normal;
    const double cos_alpha = clamp(std::abs(mesh_n.dot(n)), 0.0, 1.0);
    const Eigen::Vector2d k = surface.principal_curvatures(proj.u, proj.v);
    const double d = std::abs(proj.t);
    const double sgn = proj.t >= 0.0 ? 1.0 : -1.0;
    out.push_back(cos_alpha / ((1.0 + sgn * d * k[0]) * (1.0 + sgn * d * k[1])));
  }
  return out;
}

RefinementFamily make_refinement_family(const AnalyticSurface& surface,
                                        const std::vector<double>& hs, bool validate,
                                        const AdmissibilityOptions& opts) {
  if (hs.empty()) throw BadParams("refinement family requires at least one level");
  for (std::size_t i = 1; i < hs.size(); ++i)
    if (!(hs[i] < hs[i - 1])) throw BadParams("refinement family steps must strictly decrease");
  RefinementFamily family;
  for (double h : hs) {
    auto mesh = std::make_shared<TriangleMesh>(sample_triangulation(surface, h));
    if (validate) {
      const AdmissibilityReport rep = admissibility_report(*mesh, surface, h, opts);
      if (!rep.pass_all)
        throw ValidationError("triangulation at h=" + std::to_string(h) +
                              " fails the admissibility checks");
    }
    family.levels.push_back({h, std::move(mesh)});
  }
  return family;
}

}  // namespace fvmatch

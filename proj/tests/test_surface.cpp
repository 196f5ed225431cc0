#include <doctest.h>

#include <cmath>

#include "fvmatch/surface.hpp"
#include "support/oracles.hpp"

using namespace fvmatch;
using namespace testsupport;

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  GaussRule1D rule = gauss_legendre(4, 0.0, 1.0);
  double integral = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    integral += rule.weights[i] * std::pow(rule.nodes[i], 7.0);  // degree 7 = 2*4-1
  CHECK(integral == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("builtin surfaces") {
  SUBCASE("sphere cap") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    CHECK(cap->area() == doctest::Approx(M_PI).epsilon(1e-14));
    Eigen::Vector2d k = cap->principal_curvatures(0.4, 1.0);
    CHECK(k[0] == doctest::Approx(1.0));
    CHECK(k[1] == doctest::Approx(1.0));
    CHECK(cap->normal(0.0, 0.0).isApprox(Vec3(0, 0, 1), 1e-14));
  }
  SUBCASE("cylinder patch") {
    auto cyl = builtin_surface("cylinder_patch");
    Eigen::Vector2d k = cyl->principal_curvatures(0.2, 0.5);
    CHECK(k.maxCoeff() == doctest::Approx(1.0));
    CHECK(k.minCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("flat monge patch") {
    auto flat = builtin_surface("monge_patch");
    Eigen::Vector2d k = flat->principal_curvatures(0.3, 0.7);
    CHECK(std::abs(k[0]) <= 1e-14);
    CHECK(std::abs(k[1]) <= 1e-14);
    // projection is the vertical drop
    Projection p = flat->project(Vec3(0.3, 0.4, 0.8));
    CHECK(p.foot.isApprox(Vec3(0.3, 0.4, 0.0), 1e-14));
    CHECK(p.t == doctest::Approx(0.8));
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(builtin_surface("sphere_cap", {{"radius", -1.0}}), BadParams);
    CHECK_THROWS_AS(builtin_surface("nonsense"), BadParams);
    CHECK_THROWS_AS(builtin_surface("sphere_cap", {{"bogus_key", 1.0}}), BadParams);
  }
  SUBCASE("translated surfaces shift positions, not normals") {
    auto moved = builtin_surface("sphere_cap", {{"tz", 2.0}});
    CHECK(moved->position(0, 0).isApprox(Vec3(0, 0, 3), 1e-14));
    CHECK(moved->normal(0, 0).isApprox(Vec3(0, 0, 1), 1e-14));
    Projection p = moved->project(Vec3(0, 0, 4));
    CHECK(p.t == doctest::Approx(1.0));
  }
}

TEST_CASE("projection") {
  SUBCASE("unit sphere from outside") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", 2.0}});
    Projection p = cap->project(Vec3(2, 0, 0));
    CHECK(p.foot.isApprox(Vec3(1, 0, 0), 1e-12));
    CHECK(p.t == doctest::Approx(1.0));
  }
  SUBCASE("unit cylinder") {
    auto cyl = builtin_surface("cylinder_patch",
                               {{"u0", 0.0}, {"u1", 3.0}, {"v0", 0.0}, {"v1", 6.0}});
    Projection p = cyl->project(Vec3(0, 2, 5));
    CHECK(p.foot.isApprox(Vec3(0, 1, 5), 1e-12));
    CHECK(p.t == doctest::Approx(1.0));
  }
  SUBCASE("points on the surface project to themselves") {
    auto cap = builtin_surface("sphere_cap");
    const Vec3 q = cap->position(0.5, 1.2);
    Projection p = cap->project(q);
    CHECK(p.foot.isApprox(q, 1e-12));
    CHECK(std::abs(p.t) <= 1e-12);
  }
  SUBCASE("reconstruction identity within the reach") {
    auto cap = builtin_surface("sphere_cap");
    for (int i = 0; i < 40; ++i) {
      const double u = 0.02 + 0.99 * (M_PI / 3.0 - 0.04) * (i % 8) / 7.0;
      const double v = 2.0 * M_PI * (i % 5) / 5.0;
      const double t = -0.8 + 1.6 * i / 39.0;
      const Vec3 p = cap->position(u, v) + t * cap->normal(u, v);
      Projection proj = cap->project(p);
      CHECK((p - (proj.foot + proj.t * cap->normal(proj.u, proj.v))).norm() <= 1e-8 * cap->reach());
      CHECK(proj.t == doctest::Approx(t).epsilon(1e-9));
    }
  }
  SUBCASE("outside the normal neighborhood") {
    auto flat = builtin_surface("monge_patch");
    CHECK_THROWS_AS(flat->project(Vec3(5.0, 0.5, 1.0)), OutsideReach);  // past the boundary
    auto cap = builtin_surface("sphere_cap");
    CHECK_THROWS_AS(cap->project(Vec3(0, 0, 3)), OutsideReach);  // |t| >= reach
  }
  SUBCASE("newton fallback on a curved monge patch") {
    auto bumpy = builtin_surface("monge_patch", {{"amp", 0.1}});
    const Vec3 q = bumpy->position(0.3, 0.6);
    const Vec3 n = bumpy->normal(0.3, 0.6);
    Projection p = bumpy->project(q + 0.05 * n);
    CHECK(p.foot.isApprox(q, 1e-7));
    CHECK(p.t == doctest::Approx(0.05).epsilon(1e-7));
  }
}

TEST_CASE("sample_triangulation") {
  SUBCASE("flat patch gives a planar grid with zero normal angle") {
    auto flat = builtin_surface("monge_patch");
    TriangleMesh mesh = sample_triangulation(*flat, 0.25);
    AdmissibilityOptions opts;
    opts.hausdorff_samples = 900;
    AdmissibilityReport rep = admissibility_report(mesh, *flat, 0.25, opts);
    CHECK(rep.alpha_max == 0.0);
    // the overhang ring sits at most ~h^2 past the boundary
    CHECK(rep.max_dist <= 0.25 * 0.25);
    CHECK(rep.out_area <= 0.25);
    CHECK(rep.pass_all);
    CHECK(mesh.orientation_consistent());
  }
  SUBCASE("sphere cap area error drops about four-fold when h halves") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    const double coarse = std::abs(total_area(sample_triangulation(*cap, 0.2)) - M_PI);
    const double fine = std::abs(total_area(sample_triangulation(*cap, 0.1)) - M_PI);
    CHECK(fine < coarse / 2.5);
    CHECK(fine < 0.02);
  }
  SUBCASE("regularity stays bounded across the family") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*cap, h);
      CHECK(regularity_constant(mesh) < 8.0);
      CHECK(mesh.orientation_consistent());
    }
  }
  SUBCASE("bad steps are rejected") {
    auto cap = builtin_surface("sphere_cap");
    CHECK_THROWS_AS(sample_triangulation(*cap, 0.0), BadStep);
    CHECK_THROWS_AS(sample_triangulation(*cap, 0.9), BadStep);
  }
}

TEST_CASE("admissibility report") {
  SUBCASE("planar surface with an inscribed mesh") {
    auto flat = builtin_surface("monge_patch");
    TriangleMesh mesh = unit_square();
    AdmissibilityOptions opts;
    opts.hausdorff_samples = 400;
    AdmissibilityReport rep = admissibility_report(mesh, *flat, 1.5, opts);
    CHECK(rep.alpha_max == 0.0);
    CHECK(rep.max_dist == 0.0);
    CHECK(rep.out_area == 0.0);
    CHECK(rep.injectivity_ok);
    CHECK(rep.hausdorff_estimate <= 1e-12);
  }
  SUBCASE("alpha_max scales like h on the sphere cap") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    AdmissibilityOptions opts;
    opts.hausdorff_samples = 900;
    double ratio_min = 1e9, ratio_max = 0.0;
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*cap, h);
      AdmissibilityReport rep = admissibility_report(mesh, *cap, h, opts);
      CHECK(rep.pass_all);
      ratio_min = std::min(ratio_min, rep.alpha_max / h);
      ratio_max = std::max(ratio_max, rep.alpha_max / h);
    }
    CHECK(ratio_max / ratio_min <= 3.0);
  }
  SUBCASE("a far-translated mesh fails the checks") {
    auto cap = builtin_surface("sphere_cap");
    TriangleMesh mesh = sample_triangulation(*cap, 0.3);
    std::vector<Vec3> moved;
    for (const Vec3& v : mesh.vertices()) moved.push_back(v + Vec3(10.0 * cap->reach(), 0, 0));
    TriangleMesh shifted(moved, mesh.triangles());
    AdmissibilityOptions opts;
    opts.hausdorff_samples = 400;
    AdmissibilityReport rep = admissibility_report(shifted, *cap, 0.3, opts);
    CHECK_FALSE(rep.pass_all);
    CHECK_FALSE(rep.pass_max_dist);
    CHECK(rep.out_area == doctest::Approx(total_area(shifted)));
  }
}

TEST_CASE("discretize_signal") {
  auto flat = builtin_surface("monge_patch");
  SUBCASE("constants stay constant for both elements") {
    TriangleMesh mesh = sample_triangulation(*flat, 0.3);
    auto constant = [](double, double) { return 2.75; };
    SignalP1 p1 = discretize_signal_p1(*flat, constant, mesh);
    SignalP0 p0 = discretize_signal_p0(*flat, constant, mesh);
    CHECK((p1.values.array() - 2.75).abs().maxCoeff() <= 1e-14);
    CHECK((p0.values.array() - 2.75).abs().maxCoeff() <= 1e-14);
  }
  SUBCASE("affine signals are reproduced exactly on an inscribed flat mesh") {
    TriangleMesh mesh = unit_square();
    auto affine = [](double u, double v) { return 1.5 * u - 0.25 * v + 3.0; };
    SignalP1 p1 = discretize_signal_p1(*flat, affine, mesh);
    for (int i = 0; i < mesh.num_vertices(); ++i)
      CHECK(p1.values[i] ==
            doctest::Approx(affine(mesh.vertex(i).x(), mesh.vertex(i).y())).epsilon(1e-14));
  }
  SUBCASE("lifted discretization converges to the signal in L1") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    auto signal = [](double u, double v) { return std::sin(3.0 * u) * std::cos(2.0 * v); };
    SurfaceQuadrature quad = balanced_surface_quadrature(*cap, 16);
    double previous = 1e9;
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*cap, h);
      SignalP1 fh = discretize_signal_p1(*cap, signal, mesh);
      LiftedSignal lifted = lift_signal(fh, *cap, quad);
      CHECK(lifted.missed_measure == 0.0);
      double err = 0.0;
      for (std::size_t i = 0; i < quad.size(); ++i)
        err += quad.w[i] * std::abs(lifted.values[i] - signal(quad.u[i], quad.v[i]));
      CHECK(err < previous);
      previous = err;
    }
    CHECK(previous <= 0.03);
  }
}

TEST_CASE("lift_signal") {
  auto flat = builtin_surface("monge_patch");
  SUBCASE("identity on an inscribed flat mesh") {
    TriangleMesh mesh = unit_square();
    Eigen::VectorXd values(4);
    for (int i = 0; i < 4; ++i) values[i] = 0.3 * mesh.vertex(i).x() - 0.9 * mesh.vertex(i).y();
    SignalP1 f(mesh, values);
    SurfaceQuadrature quad = surface_quadrature(*flat, 8, 8);
    LiftedSignal lifted = lift_signal(f, *flat, quad);
    CHECK(lifted.missed_measure == 0.0);
    for (std::size_t i = 0; i < quad.size(); ++i)
      CHECK(lifted.values[i] ==
            doctest::Approx(0.3 * quad.u[i] - 0.9 * quad.v[i]).epsilon(1e-12));
  }
  SUBCASE("constant signals lift to constants") {
    auto cap = builtin_surface("sphere_cap");
    TriangleMesh mesh = sample_triangulation(*cap, 0.25);
    SignalP0 f(mesh, Eigen::VectorXd::Constant(mesh.num_triangles(), -1.25));
    SurfaceQuadrature quad = balanced_surface_quadrature(*cap, 10);
    LiftedSignal lifted = lift_signal(f, *cap, quad);
    CHECK(lifted.missed_measure == 0.0);
    for (std::size_t i = 0; i < quad.size(); ++i)
      CHECK(lifted.values[i] == doctest::Approx(-1.25));
  }
  SUBCASE("lifted L1 approaches the mesh L1") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    auto signal = [](double u, double v) { return std::sin(2.0 * u + 0.3) * std::cos(v); };
    SurfaceQuadrature quad = balanced_surface_quadrature(*cap, 16);
    double previous = 1e9;
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*cap, h);
      SignalP1 fh = discretize_signal_p1(*cap, signal, mesh);
      const double mesh_l1 = l1_exact(fh);
      const double lifted_l1 = lifted_l1_norm(lift_signal(fh, *cap, quad), quad);
      const double gap = std::abs(mesh_l1 - lifted_l1);
      CHECK(gap < previous);
      previous = gap;
    }
    CHECK(previous <= 5e-3);
  }
}

TEST_CASE("continuous energy oracle") {
  auto flat = builtin_surface("monge_patch");
  DiscreteVarifold empty_target;
  SUBCASE("zero signal with no attachment term") {
    EnergyModel model;
    model.variant = ModelVariant::L2;
    model.alpha = 1.0;
    model.gamma_w = 0.0;
    CHECK(continuous_energy_oracle(*flat, [](double, double) { return 0.0; }, empty_target,
                                   model) == doctest::Approx(0.0));
  }
  SUBCASE("constant signal on the flat unit square") {
    EnergyModel model;
    model.variant = ModelVariant::L2;
    model.alpha = 2.0;
    model.gamma_w = 0.0;
    CHECK(continuous_energy_oracle(*flat, [](double, double) { return 1.0; }, empty_target,
                                   model) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("discrete varifold norm approaches the continuous one") {
    const KernelParams kp(0.4, 1.0, 1.0);
    auto zero = [](double, double) { return 0.0; };
    const double continuous = continuous_varifold_norm2(*flat, zero, kp);
    double previous = 1e9;
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*flat, h);
      DiscreteVarifold mu =
          from_fshape(SignalP0(mesh, Eigen::VectorXd::Zero(mesh.num_triangles())));
      const double discrete = inner_product(mu, mu, kp);
      const double gap = std::abs(discrete - continuous);
      CHECK(gap < 0.45 * previous);  // at least first order in h
      previous = gap;
    }
    CHECK(previous <= 2e-2 * continuous);
  }
}

TEST_CASE("jacobian diagnostic") {
  SUBCASE("planar mesh over the flat patch") {
    auto flat = builtin_surface("monge_patch");
    TriangleMesh mesh = unit_square();
    std::vector<JacobianSample> samples = {{0, 0.2, 0.3, 0.5}, {1, 1.0 / 3, 1.0 / 3, 1.0 / 3}};
    for (double det : jacobian_diagnostic(*flat, mesh, samples))
      CHECK(det == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("points on the surface give exactly one") {
    auto cap = builtin_surface("sphere_cap");
    // a tiny triangle whose first vertex lies on the sphere
    const Vec3 q = cap->position(0.4, 0.7);
    TriangleMesh mesh = single_triangle(q, q + Vec3(1e-3, 0, 0), q + Vec3(0, 1e-3, 0));
    std::vector<double> det = jacobian_diagnostic(*cap, mesh, {{0, 1.0, 0.0, 0.0}});
    // d = 0 kills the curvature factors; only cos(alpha) remains
    const Vec3 n = cap->normal(0.4, 0.7);
    CHECK(det[0] ==
          doctest::Approx(std::abs(mesh.raw_geometry(0).unit_normal.dot(n))).epsilon(1e-9));
  }
  SUBCASE("sphere cap family drifts to one under refinement") {
    auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
    double previous = 1e9;
    for (double h : {0.3, 0.15, 0.075}) {
      TriangleMesh mesh = sample_triangulation(*cap, h);
      std::vector<JacobianSample> samples;
      for (int k = 0; k < mesh.num_triangles(); k += 3) samples.push_back({k});
      double worst = 0.0;
      for (double det : jacobian_diagnostic(*cap, mesh, samples))
        worst = std::max(worst, std::abs(det - 1.0));
      CHECK(worst < previous);
      previous = worst;
    }
    CHECK(previous <= 0.01);
  }
}

TEST_CASE("refinement families") {
  auto cap = builtin_surface("sphere_cap", {{"theta_max", M_PI / 3.0}});
  SUBCASE("steps must decrease") {
    CHECK_THROWS_AS(make_refinement_family(*cap, {0.2, 0.2}), BadParams);
    CHECK_THROWS_AS(make_refinement_family(*cap, {}), BadParams);
  }
  SUBCASE("validated family passes admissibility") {
    AdmissibilityOptions opts;
    opts.hausdorff_samples = 400;
    RefinementFamily family = make_refinement_family(*cap, {0.3, 0.15}, true, opts);
    CHECK(family.levels.size() == 2);
    CHECK(family.levels[0].mesh->num_triangles() < family.levels[1].mesh->num_triangles());
  }
}

#include <doctest.h>

#include <cmath>

#include "fvmatch/fem.hpp"
#include "support/oracles.hpp"

using namespace fvmatch;
using namespace testsupport;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) out[i++] = v;
  return out;
}

}  // namespace

TEST_CASE("p0 projection takes barycenter values") {
  TriangleMesh mesh = unit_right_triangle();
  SignalP1 f(mesh, vec({3, 6, 9}));
  CHECK(p0_project(f).values[0] == doctest::Approx(6.0).epsilon(1e-15));

  SUBCASE("constant signals stay constant") {
    TriangleMesh square = unit_square();
    SignalP1 c(square, Eigen::VectorXd::Constant(4, 2.5));
    SignalP0 p = p0_project(c);
    for (int k = 0; k < square.num_triangles(); ++k) CHECK(p.values[k] == doctest::Approx(2.5));
  }

  SUBCASE("projection equals the interpolant at the barycenter") {
    TriangleMesh mesh2 = random_mesh(101);
    SignalP1 f2(mesh2, random_signal(5, mesh2.num_vertices()));
    SignalP0 p = p0_project(f2);
    for (int k = 0; k < mesh2.num_triangles(); ++k)
      CHECK(p.values[k] ==
            doctest::Approx(eval_p1(f2, k, 1.0 / 3, 1.0 / 3, 1.0 / 3)).epsilon(1e-14));
  }

  SUBCASE("linear and idempotent") {
    TriangleMesh mesh2 = random_mesh(102);
    Eigen::VectorXd a = random_signal(6, mesh2.num_vertices());
    Eigen::VectorXd b = random_signal(7, mesh2.num_vertices());
    Eigen::VectorXd lhs = p0_project(SignalP1(mesh2, 2.0 * a + 3.0 * b)).values;
    Eigen::VectorXd rhs =
        2.0 * p0_project(SignalP1(mesh2, a)).values + 3.0 * p0_project(SignalP1(mesh2, b)).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("p1 assembly") {
  TriangleMesh mesh = unit_square();
  SUBCASE("round-trips the dof vector") {
    Eigen::VectorXd values = random_signal(8, 4);
    SignalP1 f = p1_assemble(mesh, values);
    CHECK((f.values - values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("basis vector gives the hat function") {
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(4);
    e2[2] = 1.0;
    SignalP1 hat = p1_assemble(mesh, e2);
    CHECK(eval_p1(hat, 0, 0, 0, 1) == doctest::Approx(1.0));  // triangle 0 = (0,1,2)
    CHECK(eval_p1(hat, 0, 1, 0, 0) == doctest::Approx(0.0));
    CHECK(eval_p1(hat, 0, 0.25, 0.5, 0.25) == doctest::Approx(0.25));
  }
  SUBCASE("assembly is additive") {
    Eigen::VectorXd a = random_signal(9, 4), b = random_signal(10, 4);
    SignalP1 sum = p1_assemble(mesh, a + b);
    CHECK((sum.values - (p1_assemble(mesh, a).values + p1_assemble(mesh, b).values))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(p1_assemble(mesh, Eigen::VectorXd::Zero(3)), LengthMismatch);
    CHECK_THROWS_AS(SignalP0(mesh, Eigen::VectorXd::Zero(7)), LengthMismatch);
  }
}

TEST_CASE("lp_norm_p0") {
  TriangleMesh big = single_triangle(Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0));  // area 2
  CHECK(lp_norm_p0(SignalP0(big, vec({3})), 2.0) == doctest::Approx(18.0).epsilon(1e-15));
  CHECK(lp_norm_p0(SignalP0(big, vec({0})), 1.0) == 0.0);
  CHECK(lp_norm_p0(SignalP0(big, vec({0})), 3.7) == 0.0);
  CHECK_THROWS_AS(lp_norm_p0(SignalP0(big, vec({1})), 0.5), BadExponent);

  SUBCASE("matches dense quadrature for piecewise constants") {
    TriangleMesh mesh = random_mesh(201);
    Eigen::VectorXd values = random_signal(11, mesh.num_triangles());
    for (double p : {1.0, 2.0, 2.7}) {
      double expected = 0.0;
      for (int k = 0; k < mesh.num_triangles(); ++k) {
        for (const BaryNode& n : triangle_rule_deg5())
          expected += mesh.raw_geometry(k).area * n.w * std::pow(std::abs(values[k]), p);
      }
      CHECK(lp_norm_p0(SignalP0(mesh, values), p) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("newton_cotes_lp") {
  TriangleMesh mesh = unit_right_triangle();
  SUBCASE("hand value for f = y on the unit right triangle") {
    // (1/3)(1/2)(0.25 + 0 + 0.25) = 1/12, the exact integral of a squared
    // barycentric coordinate
    CHECK(newton_cotes_lp(SignalP1(mesh, vec({0, 1, 0})), 2) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  }
  SUBCASE("constant signals integrate to c * area") {
    TriangleMesh square = unit_square();
    SignalP1 c(square, Eigen::VectorXd::Constant(4, 1.75));
    CHECK(newton_cotes_lp(c, 1) == doctest::Approx(1.75).epsilon(1e-14));
  }
  SUBCASE("nonnegative signals match quadrature at p = 1") {
    TriangleMesh mesh2 = random_mesh(202);
    Eigen::VectorXd values = random_signal(12, mesh2.num_vertices()).cwiseAbs();
    SignalP1 f(mesh2, values);
    CHECK(newton_cotes_lp(f, 1) ==
          doctest::Approx(quad_abs_power(mesh2, values, 1.0)).epsilon(1e-12));
  }
  SUBCASE("p = 2 matches quadrature for signed signals") {
    TriangleMesh mesh2 = random_mesh(203);
    Eigen::VectorXd values = random_signal(13, mesh2.num_vertices());
    CHECK(newton_cotes_lp(SignalP1(mesh2, values), 2) ==
          doctest::Approx(quad_abs_power(mesh2, values, 2.0)).epsilon(1e-12));
  }
  SUBCASE("rejects other exponents") {
    CHECK_THROWS_AS(newton_cotes_lp(SignalP1(mesh, vec({0, 1, 0})), 3), BadExponent);
  }
}

TEST_CASE("l1_exact") {
  TriangleMesh mesh = unit_right_triangle();
  SUBCASE("sign-changing hand value") {
    // f = (-1,1,1): negative corner contributes 1/24, positive region 5/24
    CHECK(l1_exact(SignalP1(mesh, vec({-1, 1, 1}))) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("one-signed signals reduce to the midpoint rule") {
    TriangleMesh mesh2 = random_mesh(204);
    Eigen::VectorXd values = random_signal(14, mesh2.num_vertices()).cwiseAbs();
    SignalP1 f(mesh2, values);
    CHECK(l1_exact(f) == doctest::Approx(newton_cotes_lp(f, 1)).epsilon(1e-14));
  }
  SUBCASE("symmetric under sign flip") {
    TriangleMesh mesh2 = random_mesh(205);
    Eigen::VectorXd values = random_signal(15, mesh2.num_vertices());
    CHECK(l1_exact(SignalP1(mesh2, values)) ==
          doctest::Approx(l1_exact(SignalP1(mesh2, -values))).epsilon(1e-13));
  }
  SUBCASE("matches the slicing oracle on signed signals") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      TriangleMesh mesh2 = random_mesh(300 + seed);
      Eigen::VectorXd values = random_signal(400 + seed, mesh2.num_vertices());
      CHECK(l1_exact(SignalP1(mesh2, values)) ==
            doctest::Approx(l1_slicing(mesh2, values)).epsilon(1e-11));
    }
  }
  SUBCASE("zero vertex values do not break the split") {
    CHECK(l1_exact(SignalP1(mesh, vec({0, 1, -1}))) ==
          doctest::Approx(l1_slicing(mesh, vec({0, 1, -1}))).epsilon(1e-12));
    CHECK(l1_exact(SignalP1(mesh, vec({0, 0, 1}))) == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
  }
}

TEST_CASE("gradient") {
  TriangleMesh mesh = unit_right_triangle();
  SUBCASE("f = x has gradient (1,0,0)") {
    DiscreteGradient g = gradient(SignalP1(mesh, vec({0, 1, 0})));
    CHECK(g.per_triangle[0].isApprox(Vec3(1, 0, 0), 1e-13));
  }
  SUBCASE("constants have zero gradient") {
    TriangleMesh mesh2 = random_mesh(206);
    DiscreteGradient g = gradient(SignalP1(mesh2, Eigen::VectorXd::Constant(mesh2.num_vertices(), 4.2)));
    for (const Vec3& v : g.per_triangle) CHECK(v.norm() <= 1e-12);
  }
  SUBCASE("linearity") {
    TriangleMesh mesh2 = random_mesh(207);
    Eigen::VectorXd a = random_signal(16, mesh2.num_vertices());
    Eigen::VectorXd b = random_signal(17, mesh2.num_vertices());
    DiscreteGradient ga = gradient(SignalP1(mesh2, a));
    DiscreteGradient gb = gradient(SignalP1(mesh2, b));
    DiscreteGradient gc = gradient(SignalP1(mesh2, 2.0 * a - 0.5 * b));
    for (int k = 0; k < mesh2.num_triangles(); ++k) {
      Vec3 expected = 2.0 * ga.per_triangle[static_cast<std::size_t>(k)] -
                      0.5 * gb.per_triangle[static_cast<std::size_t>(k)];
      CHECK((gc.per_triangle[static_cast<std::size_t>(k)] - expected).norm() <= 1e-11);
    }
  }
  SUBCASE("gradient lies in the triangle plane") {
    TriangleMesh mesh2 = random_mesh(208);
    DiscreteGradient g = gradient(SignalP1(mesh2, random_signal(18, mesh2.num_vertices())));
    for (int k = 0; k < mesh2.num_triangles(); ++k) {
      const Vec3& grad = g.per_triangle[static_cast<std::size_t>(k)];
      double denom = std::max(grad.norm(), 1e-30);
      CHECK(std::abs(grad.dot(mesh2.raw_geometry(k).unit_normal)) / denom <= 1e-10);
    }
  }
  SUBCASE("reproduces affine functions on planar meshes") {
    TriangleMesh plane = grid_mesh(4, 3, 0.4);
    const Vec3 coeff(1.3, -0.7, 0.0);
    Eigen::VectorXd values(plane.num_vertices());
    for (int i = 0; i < plane.num_vertices(); ++i) values[i] = coeff.dot(plane.vertex(i)) + 0.9;
    DiscreteGradient g = gradient(SignalP1(plane, values));
    for (const Vec3& v : g.per_triangle) CHECK((v - coeff).norm() <= 1e-12 * coeff.norm());
  }
}

TEST_CASE("total variation") {
  TriangleMesh mesh = random_mesh(209);
  SUBCASE("constants") {
    SignalP1 c(mesh, Eigen::VectorXd::Constant(mesh.num_vertices(), 3.0));
    CHECK(total_variation(c, 0.0) == 0.0);
    CHECK(total_variation(c, 0.25) == doctest::Approx(0.25 * total_area(mesh)).epsilon(1e-13));
  }
  SUBCASE("1-homogeneous at eps = 0") {
    Eigen::VectorXd values = random_signal(19, mesh.num_vertices());
    const double tv = total_variation(SignalP1(mesh, values), 0.0);
    CHECK(total_variation(SignalP1(mesh, -2.5 * values), 0.0) ==
          doctest::Approx(2.5 * tv).epsilon(1e-12));
  }
  SUBCASE("zero TV iff constant per connected component") {
    // two disjoint squares with different constants
    std::vector<Vec3> vs;
    std::vector<std::array<int, 3>> ts;
    for (int c = 0; c < 2; ++c) {
      const double off = 5.0 * c;
      const int base = static_cast<int>(vs.size());
      vs.push_back(Vec3(off, 0, 0));
      vs.push_back(Vec3(off + 1, 0, 0));
      vs.push_back(Vec3(off + 1, 1, 0));
      vs.push_back(Vec3(off, 1, 0));
      ts.push_back({base, base + 1, base + 2});
      ts.push_back({base, base + 2, base + 3});
    }
    TriangleMesh two(vs, ts);
    Eigen::VectorXd piecewise(8);
    piecewise << 1, 1, 1, 1, -2, -2, -2, -2;
    CHECK(total_variation(SignalP1(two, piecewise), 0.0) == 0.0);

    // non-constant on a connected mesh gives strictly positive TV
    Eigen::VectorXd values = random_signal(20, mesh.num_vertices());
    values[0] += 1.0;  // ensure non-constant
    CHECK(total_variation(SignalP1(mesh, values), 0.0) > 0.0);
  }
}

TEST_CASE("h1 seminorm") {
  SUBCASE("constant is zero") {
    TriangleMesh mesh = random_mesh(210);
    CHECK(h1_seminorm(SignalP1(mesh, Eigen::VectorXd::Constant(mesh.num_vertices(), -1.0))) == 0.0);
  }
  SUBCASE("f = x on the unit square") {
    TriangleMesh square = unit_square();
    Eigen::VectorXd values(4);
    for (int i = 0; i < 4; ++i) values[i] = square.vertex(i).x();
    CHECK(h1_seminorm(SignalP1(square, values)) == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("2-homogeneous") {
    TriangleMesh mesh = random_mesh(211);
    Eigen::VectorXd values = random_signal(21, mesh.num_vertices());
    const double h = h1_seminorm(SignalP1(mesh, values));
    CHECK(h1_seminorm(SignalP1(mesh, 3.0 * values)) == doctest::Approx(9.0 * h).epsilon(1e-12));
  }
}

TEST_CASE("l1_smoothed") {
  TriangleMesh mesh = random_mesh(212);
  const double area = total_area(mesh);
  SUBCASE("zero signal gives eps * area for both elements") {
    CHECK(l1_smoothed(SignalP1(mesh, Eigen::VectorXd::Zero(mesh.num_vertices())), 0.1) ==
          doctest::Approx(0.1 * area).epsilon(1e-13));
    CHECK(l1_smoothed(SignalP0(mesh, Eigen::VectorXd::Zero(mesh.num_triangles())), 0.1) ==
          doctest::Approx(0.1 * area).epsilon(1e-13));
  }
  SUBCASE("within eps * area of the unsmoothed rule") {
    Eigen::VectorXd values = random_signal(22, mesh.num_vertices());
    SignalP1 f(mesh, values);
    const double unsmoothed = newton_cotes_lp(f, 1);
    for (double eps : {0.1, 0.01, 0.001}) {
      const double smoothed = l1_smoothed(f, eps);
      CHECK(smoothed >= unsmoothed - 1e-12);
      CHECK(smoothed - unsmoothed <= eps * area + 1e-12);
    }
    // on one-signed signals the unsmoothed rule is the exact L1, so the same
    // bound holds against l1_exact
    SignalP1 pos(mesh, values.cwiseAbs());
    const double exact = l1_exact(pos);
    for (double eps : {0.1, 0.01, 0.001}) {
      CHECK(l1_smoothed(pos, eps) - exact <= eps * area + 1e-12);
      CHECK(l1_smoothed(pos, eps) >= exact - 1e-12);
    }
  }
  SUBCASE("decreases monotonically toward the exact value") {
    Eigen::VectorXd values = random_signal(23, mesh.num_vertices()).cwiseAbs();
    SignalP1 f(mesh, values);
    const double exact = l1_exact(f);
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {1e-1, 1e-2, 1e-3}) {
      const double smoothed = l1_smoothed(f, eps);
      CHECK(smoothed < previous);
      previous = smoothed;
    }
    CHECK(previous - exact <= 1e-3 * area);
  }
  SUBCASE("rejects nonpositive eps") {
    CHECK_THROWS_AS(l1_smoothed(SignalP1(mesh, Eigen::VectorXd::Zero(mesh.num_vertices())), 0.0),
                    NonpositiveEpsilon);
  }
}

TEST_CASE("fem exactness across random meshes") {
  // lighter version of the acceptance sweep
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TriangleMesh mesh = random_mesh(500 + seed, 3, 3);
    for (int rep = 0; rep < 4; ++rep) {
      Eigen::VectorXd values = random_signal(600 + 10 * seed + rep, mesh.num_vertices());
      CHECK(newton_cotes_lp(SignalP1(mesh, values), 2) ==
            doctest::Approx(quad_abs_power(mesh, values, 2.0)).epsilon(1e-12));
      CHECK(l1_exact(SignalP1(mesh, values)) ==
            doctest::Approx(l1_slicing(mesh, values)).epsilon(1e-10));
    }
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "entrolab/space.hpp"

using namespace entrolab;

namespace {

Vector smooth_sample(const MeasureSpace& space, double freq, double phase) {
  const Vector& x = space.coordinate(0);
  Vector v(space.size());
  for (Index i = 0; i < space.size(); ++i) v[i] = std::sin(freq * x[i] + phase);
  return v;
}

}  // namespace

TEST_CASE("interval grid geometry and measure") {
  const Index n = 41;
  const double L = 8.0;
  MeasureSpace g = build_interval_grid(n, L, Boundary::neumann);
  CHECK(g.kind() == MeasureSpace::Kind::grid1d);
  CHECK(g.size() == n);
  const double h = L / double(n - 1);
  CHECK(g.axes().front().spacing() == doctest::Approx(h));
  CHECK(g.coordinate(0)[0] == doctest::Approx(0.0));
  CHECK(g.coordinate(0)[n - 1] == doctest::Approx(L));
  // half cells at the ends, full cells inside, total mass = L exactly
  CHECK(g.measure()[0] == doctest::Approx(h / 2));
  CHECK(g.measure()[n / 2] == doctest::Approx(h));
  CHECK(g.total_mass() == doctest::Approx(L).epsilon(1e-14));
  CHECK(g.curvature_k() == 0.0);
  CHECK(g.dimension_n() == doctest::Approx(1.0));

  MeasureSpace p = build_interval_grid(n, L, Boundary::periodic);
  CHECK(p.axes().front().spacing() == doctest::Approx(L / double(n)));
  CHECK(p.measure().minCoeff() == doctest::Approx(p.measure().maxCoeff()));
  CHECK(p.total_mass() == doctest::Approx(L).epsilon(1e-14));
}

TEST_CASE("generator is self-adjoint and mass preserving") {
  for (Boundary b : {Boundary::neumann, Boundary::periodic}) {
    MeasureSpace g = build_interval_grid(33, 5.0, b);
    Field f = g.field(smooth_sample(g, 1.3, 0.2));
    Field w = g.field(smooth_sample(g, 2.1, 1.0));
    Field Lf = g.apply_generator(f);
    Field Lw = g.apply_generator(w);
    CHECK(g.inner(Lf, w) == doctest::Approx(g.inner(f, Lw)).epsilon(1e-12));
    CHECK(std::abs(g.integrate(Lf)) < 1e-12);
    // L annihilates constants
    Field Lc = g.apply_generator(g.constant(3.7));
    CHECK(Lc.values.cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("gamma matches its defining combination") {
  MeasureSpace g = build_interval_grid(29, 4.0, Boundary::neumann);
  Field f = g.field(smooth_sample(g, 0.9, 0.0));
  Field w = g.field(smooth_sample(g, 1.7, 0.5));
  Field fw = g.field(Vector(f.values.cwiseProduct(w.values)));
  Vector expect = 0.5 * (g.apply_generator(fw).values -
                         f.values.cwiseProduct(g.apply_generator(w).values) -
                         w.values.cwiseProduct(g.apply_generator(f).values));
  Field got = g.gamma(f, w);
  CHECK((got.values - expect).cwiseAbs().maxCoeff() < 1e-13);
  // positivity of the quadratic form
  CHECK(g.gamma(f, f).values.minCoeff() >= 0.0);
  // integration by parts: int Gamma(f,w) dm = -int f Lw dm
  CHECK(g.integrate(got) == doctest::Approx(-g.inner(f, g.apply_generator(w))).epsilon(1e-11));
}

TEST_CASE("gamma2 and hessian form agree with their raw definitions") {
  MeasureSpace g = build_interval_grid(25, 3.0, Boundary::periodic);
  Field f = g.field(smooth_sample(g, 2.09, 0.3));
  Field h = g.field(smooth_sample(g, 1.1, 1.2));

  Field gff = g.gamma(f, f);
  Vector expect_g2 =
      0.5 * g.apply_generator(gff).values - g.gamma(f, g.apply_generator(f)).values;
  CHECK((g.gamma2(f).values - expect_g2).cwiseAbs().maxCoeff() < 1e-12);

  Vector expect_hess =
      g.gamma(f, g.gamma(f, h)).values - 0.5 * g.gamma(h, gff).values;
  CHECK((g.hessian_form(h, f).values - expect_hess).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma calculus on grids tracks the smooth model") {
  // fine grid, interior nodes: Gamma(f,f) ~ |f'|^2, Gamma2(f) ~ |f''|^2 (K=0)
  MeasureSpace g = build_interval_grid(801, 6.28318530717958648, Boundary::periodic);
  Field f = g.field(smooth_sample(g, 1.0, 0.0));  // sin x
  const Vector& x = g.coordinate(0);
  Vector gamma = g.gamma(f, f).values;
  Vector gamma2 = g.gamma2(f).values;
  double worst1 = 0.0, worst2 = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double c = std::cos(x[i]), s = std::sin(x[i]);
    worst1 = std::max(worst1, std::abs(gamma[i] - c * c));
    worst2 = std::max(worst2, std::abs(gamma2[i] - s * s));
  }
  CHECK(worst1 < 3e-4);
  CHECK(worst2 < 3e-4);
}

TEST_CASE("hessian HS norm of a quadratic is exact in the interior") {
  MeasureSpace g = build_interval_grid(51, 10.0, Boundary::neumann);
  const Vector& x = g.coordinate(0);
  Field q = g.field(Vector(0.5 * x.array().square()));
  Vector hs = g.hessian_hs_norm_sq(q).values;
  // second difference of x^2/2 is exactly 1 away from the ends
  for (Index i = 1; i + 1 < g.size(); ++i) {
    CHECK(hs[i] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("distance on grids is the arc metric") {
  MeasureSpace g = build_interval_grid(17, 4.0, Boundary::neumann);
  const Matrix& d = g.distance();
  const Vector& x = g.coordinate(0);
  for (Index i = 0; i < g.size(); ++i) {
    for (Index j = 0; j < g.size(); ++j) {
      CHECK(d(i, j) == doctest::Approx(std::abs(x[i] - x[j])).epsilon(1e-12));
    }
  }
  MeasureSpace p = build_interval_grid(16, 4.0, Boundary::periodic);
  const Matrix& dp = p.distance();
  CHECK(dp(0, 8) == doctest::Approx(2.0));  // halfway around
  CHECK(dp(0, 15) == doctest::Approx(0.25));
}

TEST_CASE("rectangle grid is the tensor product") {
  GridAxis ax{5, 2.0, Boundary::neumann};
  GridAxis ay{4, 3.0, Boundary::periodic};
  MeasureSpace g = build_rectangle_grid(ax, ay);
  CHECK(g.kind() == MeasureSpace::Kind::grid2d);
  CHECK(g.size() == 20);
  CHECK(g.dimension_n() == doctest::Approx(2.0));
  // node (ix, iy) has flat index iy*nx + ix
  CHECK(g.coordinate(0)[7] == doctest::Approx(1.0));   // ix = 2 of 0..4 on [0,2]
  CHECK(g.coordinate(1)[7] == doctest::Approx(0.75));  // iy = 1, spacing 3/4
  CHECK(g.total_mass() == doctest::Approx(6.0).epsilon(1e-13));

  Field f = g.field(Vector(g.coordinate(0).array().sin() +
                           (g.coordinate(1).array() * 2.0).cos()));
  Field w = g.field(Vector((g.coordinate(0).array() * 1.3).cos()));
  CHECK(g.inner(g.apply_generator(f), w) ==
        doctest::Approx(g.inner(f, g.apply_generator(w))).epsilon(1e-12));
}

TEST_CASE("weighted graph builder") {
  std::vector<MeasureSpace::Edge> edges = {{0, 1, 2.0}, {1, 2, 1.0}, {2, 3, 0.5}, {3, 0, 1.5}};
  Vector m(4);
  m << 1.0, 2.0, 1.0, 0.5;
  MeasureSpace g = build_weighted_graph(4, edges, m);
  CHECK(g.kind() == MeasureSpace::Kind::graph);
  CHECK(g.total_mass() == doctest::Approx(4.5));
  Vector f(4);
  f << 0.3, -1.0, 2.0, 0.7;
  Vector w(4);
  w << 1.0, 0.0, -0.5, 2.0;
  Field ff = g.field(f), wf = g.field(w);
  CHECK(g.inner(g.apply_generator(ff), wf) ==
        doctest::Approx(g.inner(ff, g.apply_generator(wf))).epsilon(1e-13));
  CHECK(std::abs(g.integrate(g.apply_generator(ff))) < 1e-14);
  CHECK_THROWS_AS(g.coordinate(0), UnsupportedSpace);
  CHECK_THROWS_AS(g.axes(), UnsupportedSpace);
}

TEST_CASE("field id discipline") {
  MeasureSpace a = build_interval_grid(9, 1.0, Boundary::neumann);
  MeasureSpace b = build_interval_grid(9, 1.0, Boundary::neumann);
  CHECK(a.id() != b.id());
  Field f = a.constant(1.0);
  CHECK_THROWS_AS(b.check(f), SpaceMismatch);
  CHECK_THROWS_AS(b.integrate(f), SpaceMismatch);
  CHECK_THROWS_AS(a.field(Vector::Zero(5)), InvalidArgument);
  Vector bad = Vector::Zero(9);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(a.field(bad), InvalidArgument);
}

TEST_CASE("json round trip preserves the space") {
  GridAxis ax{7, 2.5, Boundary::neumann};
  GridAxis ay{5, 1.5, Boundary::neumann};
  MeasureSpace g = build_rectangle_grid(ax, ay);
  MeasureSpace back = MeasureSpace::from_json(g.to_json());
  CHECK(back.kind() == g.kind());
  CHECK(back.size() == g.size());
  CHECK((back.measure() - g.measure()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.edges().size() == g.edges().size());
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    CHECK(back.edges()[e].i == g.edges()[e].i);
    CHECK(back.edges()[e].j == g.edges()[e].j);
    CHECK(back.edges()[e].weight == g.edges()[e].weight);
  }
  CHECK((back.coordinate(1) - g.coordinate(1)).cwiseAbs().maxCoeff() == 0.0);

  const char* path = "space_roundtrip.json";
  g.save(path);
  MeasureSpace loaded = MeasureSpace::load(path);
  CHECK(loaded.total_mass() == g.total_mass());
  std::remove(path);
}

TEST_CASE("relative entropy basics") {
  MeasureSpace g = build_interval_grid(64, 8.0, Boundary::neumann);
  // uniform density 1/m(X) has entropy -log m(X)
  Field u = g.field(Vector::Constant(g.size(), 1.0 / g.total_mass()));
  CHECK(relative_entropy(g, u) ==
        doctest::Approx(-std::log(g.total_mass())).epsilon(1e-13));
  // 0 log 0 = 0: an indicator block normalized on half the interval
  Vector v = Vector::Zero(g.size());
  double mass = 0.0;
  for (Index i = 0; i < g.size() / 2; ++i) mass += g.measure()[i];
  for (Index i = 0; i < g.size() / 2; ++i) v[i] = 1.0 / mass;
  CHECK(std::isfinite(relative_entropy(g, g.field(v))));
  CHECK(relative_entropy(g, g.field(v)) == doctest::Approx(-std::log(mass)).epsilon(1e-12));
}

TEST_CASE("builder input validation") {
  CHECK_THROWS_AS(build_interval_grid(1, 1.0, Boundary::neumann), InvalidArgument);
  CHECK_THROWS_AS(build_interval_grid(8, -1.0, Boundary::neumann), InvalidArgument);
  std::vector<MeasureSpace::Edge> edges = {{0, 1, -1.0}};
  Vector m = Vector::Ones(2);
  CHECK_THROWS_AS(build_weighted_graph(2, edges, m), InvalidArgument);
}

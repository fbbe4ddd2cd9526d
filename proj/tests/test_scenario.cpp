#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "entrolab/scenario.hpp"

using namespace entrolab;

TEST_CASE("empty object parses to the default scenario") {
  ScenarioConfig parsed = parse_scenario("{}");
  ScenarioConfig def = default_scenario();
  CHECK(parsed.space.kind == def.space.kind);
  CHECK(parsed.space.n == 400);
  CHECK(parsed.space.length == 8.0);
  CHECK(parsed.eps_ladder == def.eps_ladder);
  CHECK(parsed.time_steps == 128);
  CHECK(parsed.delta == 0.1);
  CHECK(parsed.rho0.preset == "gaussian_bump");
  CHECK(parsed.rho0.center == 2.5);
  CHECK(parsed.rho1.center == 5.5);
  CHECK(parsed.rho0.width == 0.6);
  REQUIRE(parsed.testfields.size() == 2);
  CHECK(parsed.testfields[0].preset == "smooth_bump");
  CHECK(parsed.testfields[1].preset == "clipped_square");
  CHECK(parsed.checks.empty());
  CHECK(parsed.tol.sinkhorn == 1e-9);
  CHECK(parsed.tol.max_w2_slope == -0.4);
}

TEST_CASE("config rejections") {
  CHECK_THROWS_AS(parse_scenario("not json"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[1,2]"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"surprise": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"time_steps": "many"})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"time_steps": 8})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"eps_ladder": []})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"eps_ladder": [0.1, 0.2]})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"eps_ladder": [0.2, -0.1]})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"delta": 0.5})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"delta": 0.001})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"checks": ["nonsense"]})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"heat_times": [0.0]})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"max_iterations": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"tol": {"sinkhorn": 0.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"tol": {"unheard_of": 1.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"space": {"kind": "mobius"}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"rho0": {"preset": "delta"}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(R"({"testfields": []})"), ConfigError);
}

TEST_CASE("shorthand and overrides") {
  ScenarioConfig cfg = parse_scenario(R"({
    "space": {"kind": "grid1d", "n": 64, "length": 4.0, "boundary": "periodic"},
    "rho0": "uniform",
    "rho1": {"preset": "double_bump", "center": 1.0, "center2": 3.0, "width": 0.3},
    "eps_ladder": [0.5, 0.25],
    "time_steps": 16,
    "checks": ["identities", "bounds"],
    "tol": {"mass": 1e-9},
    "seed": 99,
    "output_dir": "artifacts"
  })");
  CHECK(cfg.space.boundary == "periodic");
  CHECK(cfg.rho0.preset == "uniform");
  CHECK(cfg.rho1.preset == "double_bump");
  CHECK(cfg.eps_ladder == std::vector<double>{0.5, 0.25});
  CHECK(cfg.checks == std::vector<std::string>{"identities", "bounds"});
  CHECK(cfg.tol.mass == 1e-9);
  CHECK(cfg.tol.sinkhorn == 1e-9);  // untouched defaults survive
  CHECK(cfg.seed == 99);
  CHECK(cfg.output_dir == "artifacts");
}

TEST_CASE("known checks vocabulary") {
  const std::vector<std::string>& k = known_checks();
  for (const char* name : {"identities", "prop5", "bounds", "sweep", "geodesic_formula",
                           "heat_estimates"}) {
    CHECK(std::count(k.begin(), k.end(), name) == 1);
  }
  CHECK(k.size() == 6);
}

TEST_CASE("spaces are built to spec") {
  SpaceSpec one;
  one.n = 50;
  one.length = 4.0;
  MeasureSpace g1 = build_space(one);
  CHECK(g1.kind() == MeasureSpace::Kind::grid1d);
  CHECK(g1.size() == 50);
  CHECK(g1.total_mass() == doctest::Approx(4.0));

  SpaceSpec two;
  two.kind = "grid2d";
  two.n = 12;
  two.length = 2.0;
  two.ny = 8;
  two.length_y = 1.0;
  MeasureSpace g2 = build_space(two);
  CHECK(g2.kind() == MeasureSpace::Kind::grid2d);
  CHECK(g2.size() == 96);

  // ny = 0 copies the x axis
  two.ny = 0;
  two.length_y = 0.0;
  CHECK(build_space(two).size() == 144);

  SpaceSpec bad;
  bad.n = 2;
  CHECK_THROWS_AS(build_space(bad), ConfigError);

  SpaceSpec file_spec;
  file_spec.kind = "file";
  file_spec.path = "scenario_space.json";
  g1.save(file_spec.path);
  MeasureSpace loaded = build_space(file_spec);
  CHECK(loaded.size() == 50);
  CHECK(loaded.total_mass() == g1.total_mass());
  std::remove(file_spec.path.c_str());
  CHECK_THROWS_AS(build_space(file_spec), ConfigError);
}

TEST_CASE("marginals are normalized and validated") {
  MeasureSpace g = build_space(SpaceSpec{});
  MarginalSpec spec;
  spec.preset = "gaussian_bump";
  spec.center = 2.5;
  spec.width = 0.6;
  Field f = build_marginal(g, spec, "rho0");
  CHECK(g.integrate(f) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.values.minCoeff() > 0.0);

  MarginalSpec blockspec;
  blockspec.preset = "indicator_block";
  blockspec.left = 1.0;
  blockspec.right = 2.0;
  Field blk = build_marginal(g, blockspec, "rho0");
  CHECK(g.integrate(blk) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(blk.values.minCoeff() == 0.0);

  MarginalSpec bad;
  bad.preset = "explicit";
  bad.values = {1.0, 2.0};  // wrong size
  CHECK_THROWS_AS(build_marginal(g, bad, "rho1"), ConfigError);

  bad.values.assign(std::size_t(g.size()), 1.0);
  bad.values[3] = -0.5;
  try {
    build_marginal(g, bad, "rho1");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("rho1") != std::string::npos);
  }

  MarginalSpec degenerate = blockspec;
  degenerate.left = 100.0;  // empty window
  degenerate.right = 101.0;
  CHECK_THROWS_AS(build_marginal(g, degenerate, "rho0"), ConfigError);
}

TEST_CASE("test fields and their names") {
  MeasureSpace g = build_space(SpaceSpec{});
  TestFieldSpec bump;  // defaults
  CHECK(test_field_name(bump) == "smooth_bump_c4_w1.2");
  Field fb = build_test_field(g, bump);
  CHECK(fb.values.maxCoeff() <= 1.0 + 1e-12);

  TestFieldSpec clipped;
  clipped.preset = "clipped_square";
  CHECK(test_field_name(clipped) == "clipped_square_c4_r2.5");
  Field fc = build_test_field(g, clipped);
  // quadratic near the center, linear growth outside the radius
  const Vector& x = g.coordinate(0);
  for (Index i = 0; i < g.size(); ++i) {
    const double d = std::abs(x[i] - 4.0);
    if (d < 2.4) CHECK(fc[i] == doctest::Approx(0.5 * d * d).epsilon(1e-12));
  }

  TestFieldSpec half;
  half.preset = "half_square";
  Field fh = build_test_field(g, half);
  CHECK(fh[g.size() - 1] == doctest::Approx(32.0).epsilon(1e-12));

  TestFieldSpec c;
  c.preset = "constant";
  CHECK(build_test_field(g, c).values.minCoeff() == 1.0);
}

TEST_CASE("scenario files load like strings") {
  const char* path = "scenario_roundtrip.json";
  {
    std::ofstream out(path);
    out << R"({"time_steps": 32, "eps_ladder": [0.4, 0.2, 0.1]})";
  }
  ScenarioConfig cfg = load_scenario(path);
  CHECK(cfg.time_steps == 32);
  CHECK(cfg.eps_ladder.size() == 3);
  std::remove(path);
  CHECK_THROWS_AS(load_scenario(path), ConfigError);
}

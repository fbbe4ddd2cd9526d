#include "entrolab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entrolab/errors.hpp"
#include "entrolab/report.hpp"

namespace entrolab {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError("config: " + msg); }

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + " must be a number");
  return j.get<double>();
}

Index as_index(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where + " must be an integer");
  return j.get<Index>();
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) bad(where + " must be a string");
  return j.get<std::string>();
}

std::vector<double> as_number_list(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(as_number(v, where + " entries"));
  return out;
}

SpaceSpec parse_space(const json& j) {
  SpaceSpec spec;
  if (!j.is_object()) bad("space must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") spec.kind = as_string(value, "space.kind");
    else if (key == "n") spec.n = as_index(value, "space.n");
    else if (key == "length") spec.length = as_number(value, "space.length");
    else if (key == "boundary") spec.boundary = as_string(value, "space.boundary");
    else if (key == "ny") spec.ny = as_index(value, "space.ny");
    else if (key == "length_y") spec.length_y = as_number(value, "space.length_y");
    else if (key == "path") spec.path = as_string(value, "space.path");
    else bad("unknown key space." + key);
  }
  if (spec.kind != "grid1d" && spec.kind != "grid2d" && spec.kind != "file") {
    bad("space.kind must be grid1d, grid2d, or file");
  }
  if (spec.boundary != "neumann" && spec.boundary != "periodic") {
    bad("space.boundary must be neumann or periodic");
  }
  if (spec.kind == "file" && spec.path.empty()) bad("space.path is required for kind file");
  return spec;
}

MarginalSpec parse_marginal(const json& j, const std::string& label) {
  MarginalSpec spec;
  if (j.is_string()) {  // shorthand: "uniform"
    spec.preset = j.get<std::string>();
  } else if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") spec.preset = as_string(value, label + ".preset");
      else if (key == "center") spec.center = as_number(value, label + ".center");
      else if (key == "width") spec.width = as_number(value, label + ".width");
      else if (key == "center2") spec.center2 = as_number(value, label + ".center2");
      else if (key == "left") spec.left = as_number(value, label + ".left");
      else if (key == "right") spec.right = as_number(value, label + ".right");
      else if (key == "values") spec.values = as_number_list(value, label + ".values");
      else bad("unknown key " + label + "." + key);
    }
  } else {
    bad(label + " must be an object or a preset name");
  }
  if (spec.preset != "uniform" && spec.preset != "gaussian_bump" && spec.preset != "double_bump" &&
      spec.preset != "indicator_block" && spec.preset != "explicit") {
    bad(label + ".preset '" + spec.preset + "' is not known");
  }
  return spec;
}

TestFieldSpec parse_test_field(const json& j, const std::string& label) {
  TestFieldSpec spec;
  if (j.is_string()) {
    spec.preset = j.get<std::string>();
  } else if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") spec.preset = as_string(value, label + ".preset");
      else if (key == "center") spec.center = as_number(value, label + ".center");
      else if (key == "width") spec.width = as_number(value, label + ".width");
      else if (key == "radius") spec.radius = as_number(value, label + ".radius");
      else bad("unknown key " + label + "." + key);
    }
  } else {
    bad(label + " must be an object or a preset name");
  }
  if (spec.preset != "constant" && spec.preset != "coordinate" && spec.preset != "smooth_bump" &&
      spec.preset != "half_square" && spec.preset != "clipped_square") {
    bad(label + ".preset '" + spec.preset + "' is not known");
  }
  return spec;
}

void parse_tolerances(const json& j, ToleranceSet& tol) {
  if (!j.is_object()) bad("tol must be an object");
  for (const auto& [key, value] : j.items()) {
    const double v = as_number(value, "tol." + key);
    if (key == "sinkhorn") tol.sinkhorn = v;
    else if (key == "mass") tol.mass = v;
    else if (key == "potential_sum") tol.potential_sum = v;
    else if (key == "parallelogram") tol.parallelogram = v;
    else if (key == "gauge") tol.gauge = v;
    else if (key == "time_reversal") tol.time_reversal = v;
    else if (key == "min_order") tol.min_order = v;
    else if (key == "max_ratio") tol.max_ratio = v;
    else if (key == "decay_factor") tol.decay_factor = v;
    else if (key == "max_w2_slope") tol.max_w2_slope = v;
    else if (key == "heat") tol.heat = v;
    else if (key == "tail_ratio") tol.tail_ratio = v;
    else bad("unknown key tol." + key);
  }
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.eps_ladder.empty()) bad("eps_ladder must not be empty");
  for (std::size_t i = 0; i < cfg.eps_ladder.size(); ++i) {
    if (!(cfg.eps_ladder[i] > 0.0)) bad("eps_ladder entries must be positive");
    if (i > 0 && !(cfg.eps_ladder[i] < cfg.eps_ladder[i - 1])) {
      bad("eps_ladder must be strictly descending");
    }
  }
  if (cfg.time_steps < 16) bad("time_steps must be at least 16");
  if (!(cfg.delta > 0.0) || !(cfg.delta < 0.5)) bad("delta must lie in (0, 1/2)");
  if (cfg.delta * static_cast<double>(cfg.time_steps) < 1.0) {
    bad("delta must cover at least one time step (delta >= 1/time_steps)");
  }
  if (cfg.max_iterations < 1) bad("max_iterations must be positive");
  if (!(cfg.tol.sinkhorn > 0.0)) bad("tol.sinkhorn must be positive");
  for (const std::string& c : cfg.checks) {
    bool known = false;
    for (const std::string& k : known_checks()) known = known || k == c;
    if (!known) bad("unknown check '" + c + "'");
  }
  for (double t : cfg.heat_times) {
    if (!(t > 0.0)) bad("heat_times must be positive");
  }
}

}  // namespace

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {"identities", "prop5",            "bounds",
                                                 "sweep",      "geodesic_formula", "heat_estimates"};
  return names;
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.rho0.preset = "gaussian_bump";
  cfg.rho0.center = 2.5;
  cfg.rho0.width = 0.6;
  cfg.rho1.preset = "gaussian_bump";
  cfg.rho1.center = 5.5;
  cfg.rho1.width = 0.6;
  cfg.testfields.push_back(TestFieldSpec{});  // smooth_bump c=4 w=1.2
  TestFieldSpec clipped;
  clipped.preset = "clipped_square";
  clipped.center = 4.0;
  clipped.radius = 2.5;
  cfg.testfields.push_back(clipped);
  return cfg;
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");

  ScenarioConfig cfg = default_scenario();
  bool testfields_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "space") cfg.space = parse_space(value);
    else if (key == "rho0") cfg.rho0 = parse_marginal(value, "rho0");
    else if (key == "rho1") cfg.rho1 = parse_marginal(value, "rho1");
    else if (key == "eps_ladder") cfg.eps_ladder = as_number_list(value, "eps_ladder");
    else if (key == "time_steps") cfg.time_steps = as_index(value, "time_steps");
    else if (key == "delta") cfg.delta = as_number(value, "delta");
    else if (key == "max_iterations") cfg.max_iterations = as_index(value, "max_iterations");
    else if (key == "checks") {
      cfg.checks.clear();
      if (!value.is_array()) bad("checks must be an array of names");
      for (const auto& c : value) cfg.checks.push_back(as_string(c, "checks entries"));
    } else if (key == "testfields") {
      testfields_given = true;
      cfg.testfields.clear();
      if (!value.is_array()) bad("testfields must be an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        cfg.testfields.push_back(
            parse_test_field(value[i], "testfields[" + std::to_string(i) + "]"));
      }
    } else if (key == "heat_times") cfg.heat_times = as_number_list(value, "heat_times");
    else if (key == "seed") {
      if (!value.is_number_integer()) bad("seed must be an integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "output_dir") cfg.output_dir = as_string(value, "output_dir");
    else if (key == "tol") parse_tolerances(value, cfg.tol);
    else bad("unknown key " + key);
  }
  if (testfields_given && cfg.testfields.empty()) bad("testfields must not be empty");
  validate(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

MeasureSpace build_space(const SpaceSpec& spec) {
  const Boundary boundary =
      spec.boundary == "periodic" ? Boundary::periodic : Boundary::neumann;
  try {
    if (spec.kind == "grid1d") {
      return build_interval_grid(spec.n, spec.length, boundary);
    }
    if (spec.kind == "grid2d") {
      GridAxis x{spec.n, spec.length, boundary};
      GridAxis y{spec.ny > 0 ? spec.ny : spec.n,
                 spec.length_y > 0.0 ? spec.length_y : spec.length, boundary};
      return build_rectangle_grid(x, y);
    }
    if (spec.kind == "file") {
      return MeasureSpace::load(spec.path);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: space: ") + e.what());
  }
  throw ConfigError("config: space.kind '" + spec.kind + "' is not known");
}

Field build_marginal(const MeasureSpace& space, const MarginalSpec& spec,
                     const std::string& label) {
  const Index n = space.size();
  Vector values = Vector::Zero(n);

  auto axis_count = [&]() -> int { return space.kind() == MeasureSpace::Kind::grid2d ? 2 : 1; };

  if (spec.preset == "uniform") {
    values.setOnes();
  } else if (spec.preset == "gaussian_bump" || spec.preset == "double_bump") {
    if (!(spec.width > 0.0)) bad(label + ".width must be positive");
    if (space.kind() == MeasureSpace::Kind::graph) {
      bad(label + ": coordinate presets need a grid space");
    }
    const double inv = 1.0 / (2.0 * spec.width * spec.width);
    auto bump = [&](double center) {
      Vector b = Vector::Ones(n);
      for (int axis = 0; axis < axis_count(); ++axis) {
        const Vector& coord = space.coordinate(axis);
        for (Index i = 0; i < n; ++i) {
          const double d = coord[i] - center;
          b[i] *= std::exp(-d * d * inv);
        }
      }
      return b;
    };
    values = bump(spec.center);
    if (spec.preset == "double_bump") values = 0.5 * (values + bump(spec.center2));
  } else if (spec.preset == "indicator_block") {
    if (!(spec.right > spec.left)) bad(label + ": indicator_block needs left < right");
    if (space.kind() == MeasureSpace::Kind::graph) {
      bad(label + ": coordinate presets need a grid space");
    }
    const Vector& coord = space.coordinate(0);
    for (Index i = 0; i < n; ++i) {
      values[i] = (coord[i] >= spec.left && coord[i] <= spec.right) ? 1.0 : 0.0;
    }
  } else if (spec.preset == "explicit") {
    if (static_cast<Index>(spec.values.size()) != n) {
      bad(label + ".values has " + std::to_string(spec.values.size()) + " entries, space has " +
          std::to_string(n) + " nodes");
    }
    for (Index i = 0; i < n; ++i) values[i] = spec.values[static_cast<std::size_t>(i)];
  } else {
    bad(label + ".preset '" + spec.preset + "' is not known");
  }

  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) bad(label + " has a non-finite entry");
    if (values[i] < 0.0) bad(label + " has a negative entry");
  }
  const double mass = space.integrate(space.field(values));
  if (!(mass > 0.0)) bad(label + " vanishes identically");
  values /= mass;
  return space.field(std::move(values));
}

Field build_test_field(const MeasureSpace& space, const TestFieldSpec& spec) {
  const Index n = space.size();
  Vector values(n);

  if (spec.preset == "constant") {
    values.setOnes();
    return space.field(std::move(values));
  }
  if (space.kind() == MeasureSpace::Kind::graph) {
    bad("testfields: coordinate presets need a grid space");
  }
  const Vector& x = space.coordinate(0);
  if (spec.preset == "coordinate") {
    values = x;
  } else if (spec.preset == "smooth_bump") {
    if (!(spec.width > 0.0)) bad("testfields: smooth_bump width must be positive");
    const double inv = 1.0 / (2.0 * spec.width * spec.width);
    for (Index i = 0; i < n; ++i) {
      const double d = x[i] - spec.center;
      values[i] = std::exp(-d * d * inv);
    }
  } else if (spec.preset == "half_square") {
    values = 0.5 * x.array().square();
  } else if (spec.preset == "clipped_square") {
    if (!(spec.radius > 0.0)) bad("testfields: clipped_square radius must be positive");
    for (Index i = 0; i < n; ++i) {
      const double d = std::abs(x[i] - spec.center);
      values[i] = d <= spec.radius ? 0.5 * d * d : spec.radius * d - 0.5 * spec.radius * spec.radius;
    }
  } else {
    bad("testfields preset '" + spec.preset + "' is not known");
  }
  return space.field(std::move(values));
}

std::string test_field_name(const TestFieldSpec& spec) {
  if (spec.preset == "smooth_bump") {
    return spec.preset + "_c" + format_double(spec.center) + "_w" + format_double(spec.width);
  }
  if (spec.preset == "clipped_square") {
    return spec.preset + "_c" + format_double(spec.center) + "_r" + format_double(spec.radius);
  }
  return spec.preset;
}

}  // namespace entrolab

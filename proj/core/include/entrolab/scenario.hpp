#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "entrolab/space.hpp"

namespace entrolab {

struct SpaceSpec {
  std::string kind = "grid1d";       // grid1d | grid2d | file
  Index n = 400;                     // nodes (per x axis for grid2d)
  double length = 8.0;
  std::string boundary = "neumann";  // neumann | periodic
  Index ny = 0;                      // grid2d nodes along y; 0 copies n
  double length_y = 0.0;             // grid2d length along y; 0 copies length
  std::string path;                  // file: serialized space to load
};

/// Density presets. Every marginal is normalized to unit mass against the
/// space measure after evaluation.
struct MarginalSpec {
  std::string preset = "uniform";  // uniform | gaussian_bump | double_bump |
                                   // indicator_block | explicit
  double center = 0.0;             // gaussian_bump / double_bump (first bump)
  double width = 1.0;
  double center2 = 0.0;            // double_bump second bump
  double left = 0.0;               // indicator_block window on the x axis
  double right = 0.0;
  std::vector<double> values;      // explicit node values
};

/// Observables used by the flux-decay diagnostics. clipped_square is the
/// quadratic (x-center)^2/2 continued linearly outside |x-center| <= radius,
/// half_square the plain x^2/2.
struct TestFieldSpec {
  std::string preset = "smooth_bump";  // constant | coordinate | smooth_bump |
                                       // half_square | clipped_square
  double center = 4.0;
  double width = 1.2;   // smooth_bump
  double radius = 2.5;  // clipped_square
};

/// Thresholds of the runner checks; all overridable from the config file.
struct ToleranceSet {
  double sinkhorn = 1e-9;        // marginal residual target of the solver
  double mass = 1e-10;           // mass conservation along the curve
  double potential_sum = 1e-10;  // phi + psi = eps log rho
  double parallelogram = 1e-9;   // E1 = E2
  double gauge = 1e-10;          // density invariance under shifted starts
  double time_reversal = 1e-10;  // swap the marginals, reverse time
  double min_order = 1.0;        // derivative-identity refinement order
  double max_ratio = 2.0;        // boundedness factor across the eps ladder
  double decay_factor = 0.2;     // |flux(eps_min)| < factor * |flux(eps_max)|
  double max_w2_slope = -0.4;    // slope of log sup_t W2 against log(1/eps)
  double heat = 1e-3;            // slack of the pointwise heat estimates
  double tail_ratio = 3.0;       // second-order integrals max/min over ladder
};

struct ScenarioConfig {
  SpaceSpec space;
  MarginalSpec rho0, rho1;
  std::vector<double> eps_ladder = {0.5, 0.2, 0.1, 0.05, 0.02};
  Index time_steps = 128;  // J; curves carry J+1 samples
  double delta = 0.1;      // window [delta, 1-delta] of the time integrals
  Index max_iterations = 50000;
  std::vector<std::string> checks;        // empty = all known checks
  std::vector<TestFieldSpec> testfields;  // empty = documented defaults
  std::vector<double> heat_times = {0.05, 0.2, 1.0};
  std::uint64_t seed = 1234;  // seeds the randomized spot checks of verify
  std::string output_dir = ".";
  ToleranceSet tol;
};

/// Two separated Gaussian bumps on a Neumann interval; equals the parse of
/// an empty config object.
ScenarioConfig default_scenario();

/// Parses one JSON object. Unknown keys, wrong types, and out-of-range
/// values raise ConfigError; missing keys keep their defaults.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

/// Check vocabulary accepted in ScenarioConfig::checks.
const std::vector<std::string>& known_checks();

MeasureSpace build_space(const SpaceSpec& spec);

/// Normalized density field; degenerate data raise ConfigError naming
/// `label` (the config key of the offending marginal).
Field build_marginal(const MeasureSpace& space, const MarginalSpec& spec,
                     const std::string& label);

Field build_test_field(const MeasureSpace& space, const TestFieldSpec& spec);

/// Stable short name for artifact columns: preset plus distinguishing
/// parameters, e.g. "smooth_bump_c4_w1.2".
std::string test_field_name(const TestFieldSpec& spec);

}  // namespace entrolab

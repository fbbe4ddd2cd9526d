#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entrolab/space.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli = ENTROLAB_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = std::string(cli) + " " + args + " > cli_scratch/last_stdout.txt 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string last_output() {
  std::ifstream in("cli_scratch/last_stdout.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kBridgeConfig = R"({
  "space": {"kind": "grid1d", "n": 64, "length": 8.0},
  "rho0": {"preset": "gaussian_bump", "center": 2.5, "width": 0.6},
  "rho1": {"preset": "gaussian_bump", "center": 5.5, "width": 0.6},
  "eps_ladder": [0.3],
  "time_steps": 16
})";

struct ScratchDir {
  ScratchDir() {
    fs::remove_all("cli_scratch");
    fs::create_directories("cli_scratch");
  }
};

ScratchDir scratch_guard;

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("transmogrify --config x.json") == 2);
  CHECK(run("bridge") == 2);
  CHECK(run("bridge --config cli_scratch/absent.json") == 2);
}

TEST_CASE("config errors exit with 2") {
  write_file("cli_scratch/broken.json", "{ this is not json");
  CHECK(run("bridge --config cli_scratch/broken.json") == 2);

  write_file("cli_scratch/unknown_key.json", R"({"wibble": 3})");
  CHECK(run("verify --config cli_scratch/unknown_key.json") == 2);

  // bridge wants exactly one eps
  write_file("cli_scratch/ladder.json", R"({"eps_ladder": [0.5, 0.2, 0.1]})");
  CHECK(run("bridge --config cli_scratch/ladder.json") == 2);

  // sweep wants at least three
  write_file("cli_scratch/short_ladder.json", R"({"eps_ladder": [0.3]})");
  CHECK(run("sweep --config cli_scratch/short_ladder.json") == 2);

  // graphs are refused at the command line even when loadable from a file
  std::vector<entrolab::MeasureSpace::Edge> edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
  entrolab::Vector m = entrolab::Vector::Ones(3);
  entrolab::build_weighted_graph(3, edges, m).save("cli_scratch/triangle.json");
  write_file("cli_scratch/graph_cfg.json",
             R"({"space": {"kind": "file", "path": "cli_scratch/triangle.json"},
                 "eps_ladder": [0.3]})");
  CHECK(run("bridge --config cli_scratch/graph_cfg.json") == 2);
}

TEST_CASE("bridge writes its artifacts and passes on a healthy instance") {
  write_file("cli_scratch/bridge.json", kBridgeConfig);
  CHECK(run("bridge --config cli_scratch/bridge.json --out cli_scratch/a") == 0);
  CHECK(fs::exists("cli_scratch/a/curve.csv"));
  CHECK(fs::exists("cli_scratch/a/entropy.svg"));
  CHECK(fs::exists("cli_scratch/a/density.svg"));
  CHECK(fs::exists("cli_scratch/a/potentials.svg"));
  CHECK(fs::exists("cli_scratch/a/bridge_checks.json"));
  const std::string curve = slurp("cli_scratch/a/curve.csv");
  CHECK(curve.rfind("t,x,rho,phi,psi,theta,accel\n", 0) == 0);
  const std::string out = last_output();
  CHECK(out.find("[PASS]") != std::string::npos);
  CHECK(out.find("[FAIL]") == std::string::npos);
}

TEST_CASE("repeated runs are byte identical, whatever the worker count") {
  write_file("cli_scratch/bridge.json", kBridgeConfig);
  REQUIRE(run("bridge --config cli_scratch/bridge.json --out cli_scratch/d1 --workers 1") == 0);
  REQUIRE(run("bridge --config cli_scratch/bridge.json --out cli_scratch/d2 --workers 4") == 0);
  CHECK(slurp("cli_scratch/d1/curve.csv") == slurp("cli_scratch/d2/curve.csv"));
  CHECK(slurp("cli_scratch/d1/bridge_checks.json") == slurp("cli_scratch/d2/bridge_checks.json"));
  CHECK(slurp("cli_scratch/d1/entropy.svg") == slurp("cli_scratch/d2/entropy.svg"));
}

TEST_CASE("a failed check exits with 1") {
  std::string cfg = kBridgeConfig;
  cfg.insert(cfg.rfind('}'), R"(, "tol": {"mass": 0.0})");
  write_file("cli_scratch/strict.json", cfg);
  CHECK(run("bridge --config cli_scratch/strict.json --out cli_scratch/strict") == 1);
  CHECK(last_output().find("[FAIL]") != std::string::npos);
}

TEST_CASE("solver failure exits with 3") {
  std::string cfg = kBridgeConfig;
  cfg.insert(cfg.rfind('}'), R"(, "max_iterations": 1)");
  write_file("cli_scratch/starved.json", cfg);
  CHECK(run("bridge --config cli_scratch/starved.json --out cli_scratch/starved") == 3);
}

TEST_CASE("sweep produces the ladder artifacts") {
  write_file("cli_scratch/sweep.json", R"({
    "space": {"kind": "grid1d", "n": 100, "length": 8.0},
    "rho0": {"preset": "gaussian_bump", "center": 2.5, "width": 0.6},
    "rho1": {"preset": "gaussian_bump", "center": 5.5, "width": 0.6},
    "eps_ladder": [0.5, 0.25, 0.125],
    "time_steps": 16,
    "tol": {"max_w2_slope": -0.05, "decay_factor": 0.95, "max_ratio": 5.0, "tail_ratio": 50.0}
  })");
  const int code = run("sweep --config cli_scratch/sweep.json --out cli_scratch/s --workers 3");
  CHECK(code == 0);
  CHECK(fs::exists("cli_scratch/s/sweep_summary.csv"));
  CHECK(fs::exists("cli_scratch/s/entropy.csv"));
  CHECK(fs::exists("cli_scratch/s/w2_decay.svg"));
  CHECK(fs::exists("cli_scratch/s/accel_decay.svg"));
  CHECK(fs::exists("cli_scratch/s/integrals.svg"));
  CHECK(fs::exists("cli_scratch/s/sweep_checks.json"));
  const std::string head = slurp("cli_scratch/s/sweep_summary.csv");
  CHECK(head.rfind("eps,nodes,time_steps,sup_density,lipschitz_phi,w2_deviation,"
                   "potential_deviation,i_hess,i_lap", 0) == 0);
  // one row per eps plus the header
  CHECK(std::count(head.begin(), head.end(), '\n') == 4);
  const std::string entropy = slurp("cli_scratch/s/entropy.csv");
  CHECK(entropy.rfind("eps,t,entropy\n", 0) == 0);
}

TEST_CASE("verify runs a named subset and reports machine readably") {
  write_file("cli_scratch/verify.json", R"({
    "space": {"kind": "grid1d", "n": 64, "length": 8.0},
    "rho0": {"preset": "gaussian_bump", "center": 2.5, "width": 0.6},
    "rho1": {"preset": "gaussian_bump", "center": 5.5, "width": 0.6},
    "eps_ladder": [0.3],
    "time_steps": 32,
    "checks": ["identities"]
  })");
  const int code = run("verify --config cli_scratch/verify.json --out cli_scratch/v");
  CHECK(code == 0);
  CHECK(fs::exists("cli_scratch/v/verify.json"));
  const std::string out = last_output();
  CHECK(out.find("identities.residual") != std::string::npos);
  CHECK(out.find("identities.transport_oracle_gap") != std::string::npos);
  CHECK(out.find("[FAIL]") == std::string::npos);

  // a requested check whose preconditions cannot hold is a config error
  write_file("cli_scratch/verify_bad.json", R"({
    "eps_ladder": [0.3],
    "checks": ["sweep"]
  })");
  CHECK(run("verify --config cli_scratch/verify_bad.json --out cli_scratch/vb") == 2);
}

#pragma once

#include <string>

#include "entrolab/scenario.hpp"

namespace entrolab {

struct RunOptions {
  std::string config_path;  // empty runs the built-in default scenario
  std::string output_dir;   // empty uses the config's output_dir
  int workers = 1;
};

/// Exit codes shared by the three commands: 0 all checks passed, 1 a check
/// failed, 2 configuration error, 3 solver or runtime failure.
int run_bridge(const RunOptions& options);
int run_sweep(const RunOptions& options);
int run_verify(const RunOptions& options);

}  // namespace entrolab

#pragma once

// Experiment runner behind the `sbt` executable. Configuration comes from an
// optional JSON file (--config) with command-line flags taking precedence.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 invalid configuration,
// 3 the configuration violates a hypothesis of the system or theorem.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace sbt::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kConfigError = 2, kHypothesisViolation = 3 };

struct ExperimentConfig {
  std::string subcommand;

  // system block
  std::string system = "toda";
  double epsilon = 1.0;
  double mu = 1.0;

  // run block
  double lambda = 0.0;
  double x0 = 1.0;
  double t = 1.0;
  double dt = 1e-3;
  std::size_t n_paths = 2000;
  std::uint64_t seed = 1;
  double noise_scale = 1.0;
  double kernel_power = 1.0;
  double h = 1e-3;
  std::size_t save_every = 0;  ///< simulate: store every k-th step; 0 stores the endpoints only

  // quad block
  double rel_tol = 1e-12;
  int n_panels = 16;

  std::string output;  ///< data file (CSV / SBK) where the subcommand produces one
  std::string report;  ///< JSON report file; the report is always printed to stdout too
  bool strict = false;

  // subcommand-specific
  std::string mode = "backlund";  ///< simulate: backlund | target | toda-exact | pitman
  double x_min = 0.3, x_max = 2.5;
  int n_x = 12;
  std::size_t grid_points = 50;
  std::vector<std::string> tests = {"marginal", "conditional", "pitman"};
  int n_bins = 8;
  int nmax = 5;
};

/// Reads the nested JSON form {"system": {...}, "run": {...}, "quad": {...}, ...}.
/// Unknown keys are a configuration error.
void apply_json(const nlohmann::json& j, ExperimentConfig& cfg);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// Parses args (without the program name), runs the subcommand and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbt::cli

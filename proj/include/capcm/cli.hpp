#pragma once

// Batch front end: run configuration and the solve / forward / validate / export-mesh /
// selftest pipelines.

#include "capcm/check_report.hpp"
#include "capcm/continuation.hpp"
#include "capcm/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace capcm {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 1,
  exit_hypothesis = 2,
  exit_stall = 3,
  exit_check_failed = 4,
};

struct RunConfig {
  // problem
  int n = 2;
  int k = 1;
  double theta = M_PI / 3.0;
  HomotopyMode mode = HomotopyMode::direct;
  Symmetry symmetry = Symmetry::none;
  std::string phi = "constant";  ///< constant | manufactured | perturbed-even | translated | tilted | csv
  std::optional<double> phi_value;
  std::filesystem::path phi_file;
  std::string family = "g_axi";
  double eps = 0.1;
  double scale = 1.0;
  double shift_x = 0.0, shift_y = 0.0;
  std::string s = "ell";  ///< ell | manufactured | csv (forward, export-mesh)
  std::filesystem::path s_file;
  bool exact_forward = false;

  // grid
  GridMode grid_mode = GridMode::axisym;
  int nr = 64;
  int nphi = 0;

  SolverConfig solver;

  // output
  std::filesystem::path out_dir = ".";
  bool write_obj = false;
  std::uint64_t seed = 1;

  // validate
  int af_trials = 20;
  std::string inject = "none";  ///< none | noncapillary

  DomainPtr domain() const;
};

struct CliOverrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> grid_scale;
};

/// Parses "1.047", "pi", "pi/3", "2*pi/5".
double parse_angle(const std::string& text);

/// Throws ConfigError for unknown keys, malformed values and out-of-range fields.
RunConfig make_run_config(const ConfigMap& map, const CliOverrides& overrides = {});

/// Target data for cmd_solve as described by the config.
ScalarField build_phi(const RunConfig& cfg, const DomainPtr& domain);

/// Support function for cmd_forward / cmd_export_mesh.
ScalarField build_support(const RunConfig& cfg, const DomainPtr& domain);

std::string format_check(const CheckReport& c);

int cmd_solve(const RunConfig& cfg, std::ostream& log);
int cmd_forward(const RunConfig& cfg, std::ostream& log);
int cmd_validate(const RunConfig& cfg, std::ostream& log);
int cmd_export_mesh(const RunConfig& cfg, std::ostream& log);
int cmd_selftest(std::ostream& log);

/// Maps library exceptions to exit codes around `body`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace capcm

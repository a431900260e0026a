#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmduq/monte_carlo.hpp"
#include "dmduq/operator_moments.hpp"
#include "dmduq/pinv_moments.hpp"

namespace dmduq::cli {

struct KdeConfig {
  std::optional<double> bandwidth;  // nullopt: Silverman per axis
  int grid_points = 64;
};

// Config file: a JSON object with any subset of the keys below. Unknown keys
// at any level raise ConfigError.
//   quadrature: {method, node_count, p2_max, rel_tol, cross_check}
//   variance_mode: "corrected" | "paper_literal"
//   mc: {trials, master_seed, sampling_mode, collect_eigenvalues}
//   ridge: number >= 0
//   kde: {bandwidth: "auto" | number, grid_points}
//   decimate_stride: integer >= 1
struct PipelineConfig {
  QuadratureConfig quadrature;
  VarianceMode variance_mode = VarianceMode::kCorrected;
  McConfig mc;
  double ridge = 0.0;
  KdeConfig kde;
  long decimate_stride = 900;

  void validate() const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);
// Canonical JSON rendering of every field, used as the config echo in outputs.
std::string config_to_json(const PipelineConfig& config);

// Runs the command line `args` (without the program name). Returns the
// process exit status: 0 on success, 2 on usage errors, error_exit_status()
// for library errors, 1 for anything unexpected. Errors are reported on `err`
// as {"error": {"code": ..., "message": ...}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmduq::cli

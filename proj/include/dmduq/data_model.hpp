#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmduq/numerics.hpp"

namespace dmduq {

// Uniformly sampled record of n states at m+1 instants.
struct RawTrajectory {
  std::vector<double> times;             // length m+1, seconds
  Matrix samples;                        // n x (m+1)
  std::vector<std::string> state_names;  // length n

  Index state_count() const { return samples.rows(); }
  Index sample_count() const { return samples.cols(); }
};

// Paired snapshot matrices: X = columns 1..m, Y = columns 2..m+1.
struct SnapshotSet {
  Matrix states;   // X, n x m
  Matrix shifted;  // Y, n x m
  double dt = 0.0;
  std::vector<std::string> state_names;

  Index n() const { return states.rows(); }
  Index m() const { return states.cols(); }
};

// Per-state Gaussian measurement noise, constant over time.
class NoiseModel {
 public:
  // Diagonal covariance diag(variances). Every variance must be > 0.
  static NoiseModel diagonal(const Vector& variances);
  // Full SPD covariance; variances are read off its diagonal.
  static NoiseModel full(const Matrix& covariance);

  const Vector& variances() const { return variances_; }
  const std::optional<Matrix>& full_covariance() const { return full_covariance_; }
  bool is_diagonal() const;
  Index dimension() const { return variances_.size(); }

  // Sigma, materialized as a dense matrix.
  Matrix covariance() const;

 private:
  Vector variances_;
  std::optional<Matrix> full_covariance_;
};

// Validates trajectory shape and splits it into X and Y.
// Raises TooFewSnapshots (< 3 columns) or NonUniformSampling.
SnapshotSet build_snapshots(const RawTrajectory& trajectory);

// Unbiased per-state sample variance over samples with t_start <= t <= t_end.
// Raises EmptyWindow when fewer than two samples fall inside, and ZeroVariance
// when a state is constant over the window.
NoiseModel estimate_noise(const RawTrajectory& trajectory, double t_start, double t_end);

// CSV with header "time,<name1>,...,<nameN>" and one row per sample.
RawTrajectory read_csv(std::istream& in);
void write_csv(const RawTrajectory& trajectory, std::ostream& out);
RawTrajectory load_csv(const std::string& path);
void save_csv(const RawTrajectory& trajectory, const std::string& path);

// "%.17g" rendering used by every text output of the library.
std::string format_double(double value);

}  // namespace dmduq

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmduq/data_model.hpp"
#include "dmduq/numerics.hpp"
#include "dmduq/operator_moments.hpp"

namespace dmduq {

// independent: every element x+_{tk} of a trial is computed from its own draw
//   x_t ~ N(recorded x_t, Sigma) with V_t held at the recorded snapshots, and
//   Y is perturbed separately. This is the sampling law the analytic moments
//   describe (R fixed, x+ independent of y, x+ entries independent).
// shared_trajectory: one noisy trajectory of m+1 snapshots per trial; X and Y
//   are shifted views of it and X+ is the full pseudoinverse of the noisy X.
enum class SamplingMode { kIndependent, kSharedTrajectory };

std::string sampling_mode_name(SamplingMode mode);
SamplingMode parse_sampling_mode(const std::string& name);

struct McConfig {
  long trials = 1000;
  std::uint64_t master_seed = 0;
  SamplingMode sampling_mode = SamplingMode::kIndependent;
  bool collect_eigenvalues = true;
  int threads = 0;  // <= 0: default_thread_count()

  void validate() const;
};

struct McSummary {
  long trials = 0;         // successful trials used in every statistic
  long failed_trials = 0;  // SingularGram trials (shared_trajectory only)

  Matrix pinv_mean;        // m x n, (1/N) sum x+
  Matrix pinv_second_raw;  // m x n, (1/N) sum (x+)^2
  Matrix operator_mean;      // m x m
  Matrix operator_variance;  // m x m, 1/(N-1) normalization

  // Standard errors: sample standard deviation of the averaged quantity / sqrt(N).
  // For the variance this is sqrt((m4 - m2^2) / N) from the central moments.
  Matrix pinv_mean_se;
  Matrix pinv_second_raw_se;
  Matrix operator_mean_se;
  Matrix operator_variance_se;

  std::vector<Spectrum> eigen_samples;  // per successful trial, sorted
};

// Per-trial stream seed: a splitmix64 mix of (master_seed, trial).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial);

McSummary run_mc(const SnapshotSet& snapshots, const NoiseModel& noise, const McConfig& config,
                 double ridge = 0.0);

struct OperatorInstances {
  std::vector<Matrix> instances;
  long clamped_elements = 0;  // negative variances replaced by zero
};

// Draws a_ij ~ N(mean_ij, variance_ij) independently for `count` instances.
// Negative variances are clamped to zero and counted when clamp_negative is
// set; otherwise any variance below -1e-12 raises NegativeVarianceInput.
OperatorInstances sample_operator_instances(const Matrix& mean, const Matrix& variance,
                                            long count, std::uint64_t seed,
                                            bool clamp_negative = true);
OperatorInstances sample_operator_instances(const OperatorMoments& moments, long count,
                                            std::uint64_t seed, bool clamp_negative = true);

}  // namespace dmduq

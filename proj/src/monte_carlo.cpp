#include "dmduq/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dmduq/error.hpp"
#include "dmduq/parallel.hpp"

namespace dmduq {

std::string sampling_mode_name(SamplingMode mode) {
  return mode == SamplingMode::kIndependent ? "independent" : "shared_trajectory";
}

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "independent") return SamplingMode::kIndependent;
  if (name == "shared_trajectory") return SamplingMode::kSharedTrajectory;
  throw Error(ErrorCode::kConfigError, "unknown sampling_mode '" + name + "'");
}

void McConfig::validate() const {
  if (trials < 2) throw Error(ErrorCode::kInvalidArgument, "mc trials must be >= 2");
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr long kBlockTrials = 256;

// Sums of (value - shift)^p for p = 1..4, element-wise.
struct PowerSums {
  Matrix s1, s2, s3, s4;

  PowerSums(Index rows, Index cols)
      : s1(Matrix::Zero(rows, cols)),
        s2(Matrix::Zero(rows, cols)),
        s3(Matrix::Zero(rows, cols)),
        s4(Matrix::Zero(rows, cols)) {}

  void add(const Matrix& value, const Matrix& shift) {
    const Eigen::ArrayXXd w = (value - shift).array();
    const Eigen::ArrayXXd w2 = w * w;
    s1.array() += w;
    s2.array() += w2;
    s3.array() += w2 * w;
    s4.array() += w2 * w2;
  }

  void merge(const PowerSums& other) {
    s1 += other.s1;
    s2 += other.s2;
    s3 += other.s3;
    s4 += other.s4;
  }
};

struct Moments {
  Matrix mean, mean_se, variance, variance_se, second_raw, second_raw_se;
};

Moments finalize(const PowerSums& sums, const Matrix& shift, long count) {
  const double n = static_cast<double>(count);
  const Eigen::ArrayXXd e1 = sums.s1.array() / n;
  const Eigen::ArrayXXd e2 = sums.s2.array() / n;
  const Eigen::ArrayXXd e3 = sums.s3.array() / n;
  const Eigen::ArrayXXd e4 = sums.s4.array() / n;
  const Eigen::ArrayXXd d = shift.array();
  const double bessel = n / (n - 1.0);

  Moments out;
  out.mean = (d + e1).matrix();
  const Eigen::ArrayXXd m2 = (e2 - e1 * e1).max(0.0);
  const Eigen::ArrayXXd m4 =
      e4 - 4.0 * e1 * e3 + 6.0 * e1 * e1 * e2 - 3.0 * e1 * e1 * e1 * e1;
  out.variance = (bessel * m2).matrix();
  out.mean_se = (out.variance.array() / n).sqrt().matrix();
  out.variance_se = ((m4 - m2 * m2).max(0.0) / n).sqrt().matrix();

  // z^2 = d^2 + (2 d w + w^2) with w = z - d.
  out.second_raw = (d * d + 2.0 * d * e1 + e2).matrix();
  const Eigen::ArrayXXd q_mean = 2.0 * d * e1 + e2;
  const Eigen::ArrayXXd q_square = e4 + 4.0 * d * e3 + 4.0 * d * d * e2;
  out.second_raw_se = ((bessel * (q_square - q_mean * q_mean)).max(0.0) / n).sqrt().matrix();
  return out;
}

class TrialSampler {
 public:
  TrialSampler(const SnapshotSet& snapshots, const NoiseModel& noise, const McConfig& config,
               double ridge)
      : snapshots_(snapshots), config_(config), ridge_(ridge) {
    noise_factor_ = cholesky_logdet(noise.covariance()).factor.lower;
    if (config.sampling_mode == SamplingMode::kIndependent) prepare_columns();
  }

  // Returns false when the noisy Gram matrix is singular (shared mode only).
  bool run(long trial, Matrix& pinv, Matrix& op, Spectrum* spectrum) const {
    std::mt19937_64 rng(trial_seed(config_.master_seed, static_cast<std::uint64_t>(trial)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = snapshots_.n();
    const Index m = snapshots_.m();
    Vector z(n);
    auto draw = [&](const auto& mean) -> Vector {
      for (Index i = 0; i < n; ++i) z(i) = normal(rng);
      return mean + noise_factor_ * z;
    };

    Matrix y_noisy(n, m);
    if (config_.sampling_mode == SamplingMode::kIndependent) {
      pinv.resize(m, n);
      for (Index t = 0; t < m; ++t) {
        const Matrix& r = column_inverse_[static_cast<size_t>(t)];
        for (Index k = 0; k < n; ++k) {
          const Vector x = draw(snapshots_.states.col(t));
          const Vector rx = r * x;
          pinv(t, k) = rx(k) / (1.0 + x.dot(rx));
        }
      }
      for (Index j = 0; j < m; ++j) y_noisy.col(j) = draw(snapshots_.shifted.col(j));
    } else {
      Matrix x_noisy(n, m);
      for (Index j = 0; j < m; ++j) x_noisy.col(j) = draw(snapshots_.states.col(j));
      y_noisy.leftCols(m - 1) = x_noisy.rightCols(m - 1);
      y_noisy.col(m - 1) = draw(snapshots_.shifted.col(m - 1));
      try {
        pinv = right_pseudoinverse(x_noisy, ridge_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSingularGram) throw;
        return false;
      }
    }
    op.noalias() = pinv * y_noisy;
    if (spectrum != nullptr) {
      if (m > n) {
        *spectrum = eigenvalues(Matrix(y_noisy * pinv));
        spectrum->resize(static_cast<size_t>(m), Complex(0.0, 0.0));
        sort_spectrum(*spectrum);
      } else {
        *spectrum = eigenvalues(op);
      }
    }
    return true;
  }

 private:
  void prepare_columns() {
    const Index n = snapshots_.n();
    const Index m = snapshots_.m();
    const Matrix& x = snapshots_.states;
    using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    LongMatrix gram = LongMatrix::Zero(n, n);
    for (Index l = 0; l < m; ++l) {
      const auto col = x.col(l).cast<long double>();
      gram.noalias() += col * col.transpose();
    }
    column_inverse_.resize(static_cast<size_t>(m));
    for (Index t = 0; t < m; ++t) {
      const auto xt = x.col(t).cast<long double>();
      Matrix v = (gram - xt * xt.transpose()).cast<double>();
      if (ridge_ > 0.0) v.diagonal().array() += ridge_;
      try {
        column_inverse_[static_cast<size_t>(t)] = spd_inverse(cholesky_logdet(v).factor);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNotPositiveDefinite) throw;
        throw Error(ErrorCode::kSingularV,
                    "V for snapshot column t=" + std::to_string(t) + " is singular");
      }
    }
  }

  const SnapshotSet& snapshots_;
  const McConfig& config_;
  double ridge_;
  Matrix noise_factor_;
  std::vector<Matrix> column_inverse_;
};

}  // namespace

McSummary run_mc(const SnapshotSet& snapshots, const NoiseModel& noise, const McConfig& config,
                 double ridge) {
  config.validate();
  if (noise.dimension() != snapshots.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "run_mc: noise model dimension mismatch");
  }
  if (!(ridge >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be >= 0");
  const Index n = snapshots.n();
  const Index m = snapshots.m();

  // Shifts keep the power sums well conditioned; any fixed value works.
  const Matrix pinv_shift = right_pseudoinverse(snapshots.states, ridge);
  const Matrix op_shift = pinv_shift * snapshots.shifted;

  const TrialSampler sampler(snapshots, noise, config, ridge);
  const int threads = config.threads > 0 ? config.threads : default_thread_count();
  const long blocks = (config.trials + kBlockTrials - 1) / kBlockTrials;

  PowerSums pinv_sums(m, n);
  PowerSums op_sums(m, m);
  std::vector<char> succeeded(static_cast<size_t>(config.trials), 0);
  std::vector<Spectrum> spectra(config.collect_eigenvalues ? static_cast<size_t>(config.trials)
                                                           : 0);

  for (long wave_start = 0; wave_start < blocks; wave_start += threads) {
    const long wave_blocks = std::min<long>(threads, blocks - wave_start);
    std::vector<PowerSums> pinv_partial(static_cast<size_t>(wave_blocks), PowerSums(m, n));
    std::vector<PowerSums> op_partial(static_cast<size_t>(wave_blocks), PowerSums(m, m));
    parallel_for(static_cast<size_t>(wave_blocks), threads, [&](size_t slot) {
      const long block = wave_start + static_cast<long>(slot);
      const long begin = block * kBlockTrials;
      const long end = std::min(config.trials, begin + kBlockTrials);
      Matrix pinv;
      Matrix op(m, m);
      for (long trial = begin; trial < end; ++trial) {
        Spectrum* spectrum =
            config.collect_eigenvalues ? &spectra[static_cast<size_t>(trial)] : nullptr;
        if (!sampler.run(trial, pinv, op, spectrum)) continue;
        succeeded[static_cast<size_t>(trial)] = 1;
        pinv_partial[slot].add(pinv, pinv_shift);
        op_partial[slot].add(op, op_shift);
      }
    });
    for (long b = 0; b < wave_blocks; ++b) {
      pinv_sums.merge(pinv_partial[static_cast<size_t>(b)]);
      op_sums.merge(op_partial[static_cast<size_t>(b)]);
    }
  }

  McSummary out;
  out.trials = std::count(succeeded.begin(), succeeded.end(), 1);
  out.failed_trials = config.trials - out.trials;
  if (static_cast<double>(out.failed_trials) > 0.01 * static_cast<double>(config.trials) ||
      out.trials < 2) {
    throw Error(ErrorCode::kTooManyFailedTrials,
                "run_mc: " + std::to_string(out.failed_trials) + " of " +
                    std::to_string(config.trials) + " trials had a singular Gram matrix");
  }
  const Moments pinv_stats = finalize(pinv_sums, pinv_shift, out.trials);
  const Moments op_stats = finalize(op_sums, op_shift, out.trials);
  out.pinv_mean = pinv_stats.mean;
  out.pinv_mean_se = pinv_stats.mean_se;
  out.pinv_second_raw = pinv_stats.second_raw;
  out.pinv_second_raw_se = pinv_stats.second_raw_se;
  out.operator_mean = op_stats.mean;
  out.operator_mean_se = op_stats.mean_se;
  out.operator_variance = op_stats.variance;
  out.operator_variance_se = op_stats.variance_se;
  if (config.collect_eigenvalues) {
    for (size_t i = 0; i < spectra.size(); ++i) {
      if (succeeded[i]) out.eigen_samples.push_back(std::move(spectra[i]));
    }
  }
  return out;
}

OperatorInstances sample_operator_instances(const Matrix& mean, const Matrix& variance,
                                            long count, std::uint64_t seed,
                                            bool clamp_negative) {
  if (mean.rows() != variance.rows() || mean.cols() != variance.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample_operator_instances: shape mismatch");
  }
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  OperatorInstances out;
  Matrix std_dev(variance.rows(), variance.cols());
  for (Index j = 0; j < variance.cols(); ++j) {
    for (Index i = 0; i < variance.rows(); ++i) {
      const double v = variance(i, j);
      if (v < 0.0) {
        if (!clamp_negative && v < -1e-12) {
          throw Error(ErrorCode::kNegativeVarianceInput,
                      "negative variance " + format_double(v) + " at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
        }
        ++out.clamped_elements;
      }
      std_dev(i, j) = std::sqrt(std::max(v, 0.0));
    }
  }
  out.instances.resize(static_cast<size_t>(count));
  for (long l = 0; l < count; ++l) {
    std::mt19937_64 rng(trial_seed(seed, static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix instance(mean.rows(), mean.cols());
    for (Index j = 0; j < mean.cols(); ++j) {
      for (Index i = 0; i < mean.rows(); ++i) {
        instance(i, j) = mean(i, j) + std_dev(i, j) * normal(rng);
      }
    }
    out.instances[static_cast<size_t>(l)] = std::move(instance);
  }
  return out;
}

OperatorInstances sample_operator_instances(const OperatorMoments& moments, long count,
                                            std::uint64_t seed, bool clamp_negative) {
  return sample_operator_instances(moments.first, moments.second_central, count, seed,
                                   clamp_negative);
}

}  // namespace dmduq

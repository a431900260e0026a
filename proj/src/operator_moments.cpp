#include "dmduq/operator_moments.hpp"

#include "dmduq/error.hpp"

namespace dmduq {

std::string variance_mode_name(VarianceMode mode) {
  return mode == VarianceMode::kCorrected ? "corrected" : "paper_literal";
}

VarianceMode parse_variance_mode(const std::string& name) {
  if (name == "corrected") return VarianceMode::kCorrected;
  if (name == "paper_literal") return VarianceMode::kPaperLiteral;
  throw Error(ErrorCode::kConfigError, "unknown variance_mode '" + name + "'");
}

Matrix right_pseudoinverse(const Matrix& x, double ridge) {
  Matrix gram = x * x.transpose();
  if (ridge > 0.0) gram.diagonal().array() += ridge;
  CholeskyResult chol;
  try {
    chol = cholesky_logdet(gram);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotPositiveDefinite) throw;
    throw Error(ErrorCode::kSingularGram, "X X^T is singular; rank-deficient snapshot matrix");
  }
  const auto d = chol.factor.lower.diagonal();
  const double ratio = d.minCoeff() / d.maxCoeff();
  if (ratio * ratio < 100.0 * static_cast<double>(x.rows()) * 2.220446049250313e-16) {
    throw Error(ErrorCode::kSingularGram, "X X^T is numerically singular");
  }
  return spd_solve(chol.factor, x).transpose();
}

DmdEstimate dmd_point_estimate(const SnapshotSet& snapshots, double ridge) {
  if (!(ridge >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be >= 0");
  const Matrix pinv = right_pseudoinverse(snapshots.states, ridge);
  DmdEstimate out;
  out.op = pinv * snapshots.shifted;
  const Index n = snapshots.n();
  const Index m = snapshots.m();
  if (m > n) {
    out.spectrum = eigenvalues(Matrix(snapshots.shifted * pinv));
    out.spectrum.resize(static_cast<size_t>(m), Complex(0.0, 0.0));
    sort_spectrum(out.spectrum);
  } else {
    out.spectrum = eigenvalues(out.op);
  }
  return out;
}

namespace {

void check_shapes(const PinvMoments& pinv, const SnapshotSet& snapshots,
                  const NoiseModel& noise) {
  const Index n = snapshots.n();
  const Index m = snapshots.m();
  if (pinv.first.rows() != m || pinv.first.cols() != n || pinv.second_raw.rows() != m ||
      pinv.second_raw.cols() != n || noise.dimension() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "operator moments: pseudoinverse moments must be m x n = " + std::to_string(m) +
                    "x" + std::to_string(n));
  }
}

}  // namespace

Matrix operator_first_moment(const PinvMoments& pinv, const SnapshotSet& snapshots,
                             const NoiseModel& noise) {
  check_shapes(pinv, snapshots, noise);
  return pinv.first * snapshots.shifted;
}

OperatorSecondMoment operator_second_moment(const PinvMoments& pinv,
                                            const SnapshotSet& snapshots,
                                            const NoiseModel& noise, VarianceMode mode) {
  check_shapes(pinv, snapshots, noise);
  const Matrix y_squared = snapshots.shifted.cwiseAbs2();
  const Vector noise_term = pinv.second_raw * noise.variances();  // sum_k E[x+^2] sigma_k^2

  OperatorSecondMoment out;
  if (mode == VarianceMode::kCorrected) {
    // sum_k E[x+^2](sigma_k^2 + mu_y^2) - E[x+]^2 mu_y^2
    const Matrix spread = pinv.second_raw - pinv.first.cwiseAbs2();
    out.values = spread * y_squared;
    out.values.colwise() += noise_term;
    return out;
  }
  out.values = -(pinv.first.cwiseAbs2() * y_squared);
  out.values.colwise() += noise_term;
  for (Index j = 0; j < out.values.cols(); ++j) {
    for (Index i = 0; i < out.values.rows(); ++i) {
      if (out.values(i, j) < 0.0) out.negative_elements.emplace_back(i, j);
    }
  }
  return out;
}

OperatorMoments estimate_operator_moments(const SnapshotSet& snapshots, const NoiseModel& noise,
                                          const QuadratureConfig& quad, double ridge,
                                          VarianceMode mode, int threads) {
  OperatorMoments out;
  out.pinv = pinv_moments(snapshots, noise, quad, ridge, threads);
  out.first = operator_first_moment(out.pinv, snapshots, noise);
  auto second = operator_second_moment(out.pinv, snapshots, noise, mode);
  out.second_central = std::move(second.values);
  out.negative_elements = std::move(second.negative_elements);
  out.variance_mode = mode;
  out.quadrature = quad;
  out.ridge = ridge;
  return out;
}

}  // namespace dmduq

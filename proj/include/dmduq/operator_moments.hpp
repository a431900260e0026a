#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dmduq/data_model.hpp"
#include "dmduq/numerics.hpp"
#include "dmduq/pinv_moments.hpp"

namespace dmduq {

// paper_literal reproduces sum_k E[x+^2] sigma_k^2 - E[x+]^2 mu_y^2 verbatim;
// corrected uses E[y^2] = mu_y^2 + sigma_k^2, the variance of a sum of
// independent products.
enum class VarianceMode { kPaperLiteral, kCorrected };

std::string variance_mode_name(VarianceMode mode);
VarianceMode parse_variance_mode(const std::string& name);

// A = X^+ Y, an m x m matrix.
struct DmdEstimate {
  Matrix op;
  Spectrum spectrum;
};

struct OperatorSecondMoment {
  Matrix values;
  // Elements (i, j) with a negative value; only populated in paper_literal mode.
  std::vector<std::pair<Index, Index>> negative_elements;
};

struct OperatorMoments {
  Matrix first;           // m x m
  Matrix second_central;  // m x m
  VarianceMode variance_mode = VarianceMode::kCorrected;
  std::vector<std::pair<Index, Index>> negative_elements;

  // Inputs and intermediates carried along for reporting.
  PinvMoments pinv;
  QuadratureConfig quadrature;
  double ridge = 0.0;
};

// A = X^T (X X^T + ridge I)^{-1} Y. The spectrum is obtained from the n x n
// matrix Y X^+, which shares the nonzero eigenvalues of A; the remaining m - n
// eigenvalues are exactly zero. Raises SingularGram when X X^T + ridge I is
// not positive definite.
DmdEstimate dmd_point_estimate(const SnapshotSet& snapshots, double ridge = 0.0);

// X^T (X X^T + ridge I)^{-1}, m x n.
Matrix right_pseudoinverse(const Matrix& x, double ridge = 0.0);

Matrix operator_first_moment(const PinvMoments& pinv, const SnapshotSet& snapshots,
                             const NoiseModel& noise);

OperatorSecondMoment operator_second_moment(const PinvMoments& pinv,
                                            const SnapshotSet& snapshots,
                                            const NoiseModel& noise, VarianceMode mode);

OperatorMoments estimate_operator_moments(const SnapshotSet& snapshots, const NoiseModel& noise,
                                          const QuadratureConfig& quad = {}, double ridge = 0.0,
                                          VarianceMode mode = VarianceMode::kCorrected,
                                          int threads = 0);

}  // namespace dmduq

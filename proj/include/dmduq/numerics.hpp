#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace dmduq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Complex = std::complex<double>;

// Lower-triangular Cholesky factor L of an SPD matrix, L * L^T = input.
struct SpdFactor {
  Matrix lower;

  Index dimension() const { return lower.rows(); }
};

struct CholeskyResult {
  SpdFactor factor;
  double log_determinant = 0.0;
};

// Factorizes a symmetric positive definite matrix and returns ln|M|.
//
// Inputs whose relative asymmetry max|M - M^T| / max|M| is at most 1e-9 are
// symmetrized as (M + M^T) / 2 first; larger asymmetry raises NotSymmetric.
// Raises NotPositiveDefinite when a pivot is not strictly positive.
CholeskyResult cholesky_logdet(const Matrix& matrix);

// Solves (L L^T) x = rhs.
Vector spd_solve(const SpdFactor& factor, const Vector& rhs);
Matrix spd_solve(const SpdFactor& factor, const Matrix& rhs);

// Inverse of the factored matrix, symmetric by construction.
Matrix spd_inverse(const SpdFactor& factor);

// Eigenvalues sorted by descending magnitude; equal magnitudes are ordered by
// descending imaginary part, then descending real part.
using Spectrum = std::vector<Complex>;

// Orders a spectrum in place following the Spectrum convention.
void sort_spectrum(Spectrum& spectrum);

// Eigenvalues of a dense real square matrix. max_iterations <= 0 selects the
// default cap of 10 * n^2 QR sweeps; exceeding it raises ConvergenceFailure.
Spectrum eigenvalues(const Matrix& matrix, long max_iterations = 0);

// Gauss-Laguerre rule for integrals of the form int_0^inf f(p) e^{-p} dp.
struct LaguerreRule {
  std::vector<double> nodes;        // strictly increasing, positive
  std::vector<double> weights;      // may underflow to 0 for large counts
  std::vector<double> log_weights;  // always finite
};

// Valid counts are 1..256; anything else raises CountOutOfRange.
LaguerreRule gauss_laguerre_nodes(int count);

// ln(exp(a) + exp(b)) without overflow; -inf is the additive identity.
double log_add_exp(double a, double b);

}  // namespace dmduq

#include "dmduq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dmduq/error.hpp"

namespace dmduq {

namespace {

constexpr double kSymmetryTolerance = 1e-9;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": expected a nonempty square matrix, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

CholeskyResult cholesky_logdet(const Matrix& matrix) {
  require_square(matrix, "cholesky_logdet");
  if (!matrix.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "cholesky_logdet: non-finite entries");
  }
  const double scale = matrix.cwiseAbs().maxCoeff();
  const double asymmetry = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > kSymmetryTolerance * scale) {
    throw Error(ErrorCode::kNotSymmetric,
                "cholesky_logdet: relative asymmetry " + std::to_string(asymmetry / scale) +
                    " exceeds 1e-9");
  }
  const Matrix symmetric = 0.5 * (matrix + matrix.transpose());

  Eigen::LLT<Matrix> llt(symmetric);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite, "cholesky_logdet: nonpositive pivot");
  }
  CholeskyResult result;
  result.factor.lower = llt.matrixL();
  const auto diagonal = result.factor.lower.diagonal();
  if ((diagonal.array() <= 0.0).any() || !diagonal.allFinite()) {
    throw Error(ErrorCode::kNotPositiveDefinite, "cholesky_logdet: nonpositive pivot");
  }
  result.log_determinant = 2.0 * diagonal.array().log().sum();
  return result;
}

Vector spd_solve(const SpdFactor& factor, const Vector& rhs) {
  if (rhs.size() != factor.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "spd_solve: rhs length " + std::to_string(rhs.size()) + " vs dimension " +
                    std::to_string(factor.dimension()));
  }
  const auto lower = factor.lower.triangularView<Eigen::Lower>();
  Vector y = lower.solve(rhs);
  return lower.transpose().solve(y);
}

Matrix spd_solve(const SpdFactor& factor, const Matrix& rhs) {
  if (rhs.rows() != factor.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "spd_solve: rhs rows " + std::to_string(rhs.rows()) + " vs dimension " +
                    std::to_string(factor.dimension()));
  }
  const auto lower = factor.lower.triangularView<Eigen::Lower>();
  Matrix y = lower.solve(rhs);
  return lower.transpose().solve(y);
}

Matrix spd_inverse(const SpdFactor& factor) {
  const Index n = factor.dimension();
  Matrix inverse = spd_solve(factor, Matrix(Matrix::Identity(n, n)));
  return 0.5 * (inverse + inverse.transpose());
}

void sort_spectrum(Spectrum& spectrum) {
  std::sort(spectrum.begin(), spectrum.end(), [](const Complex& a, const Complex& b) {
    const double ma = std::abs(a);
    const double mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.imag() != b.imag()) return a.imag() > b.imag();
    return a.real() > b.real();
  });
}

Spectrum eigenvalues(const Matrix& matrix, long max_iterations) {
  require_square(matrix, "eigenvalues");
  if (!matrix.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "eigenvalues: non-finite entries");
  }
  const Index n = matrix.rows();
  const long cap = max_iterations > 0 ? max_iterations : 10L * n * n;

  Spectrum spectrum;
  spectrum.reserve(static_cast<size_t>(n));
  if (n == 1) {
    spectrum.emplace_back(matrix(0, 0), 0.0);
    return spectrum;
  }
  Eigen::EigenSolver<Matrix> solver;
  solver.setMaxIterations(static_cast<Index>(cap));
  solver.compute(matrix, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kConvergenceFailure,
                "eigenvalues: QR iteration did not converge within " + std::to_string(cap) +
                    " iterations");
  }
  const auto& values = solver.eigenvalues();
  for (Index i = 0; i < n; ++i) spectrum.push_back(values(i));
  sort_spectrum(spectrum);
  return spectrum;
}

namespace {

// Evaluates L_{n}(x) and L_{n-1}(x) by the three-term recurrence.
void laguerre_pair(int n, long double x, long double& ln, long double& lnm1) {
  long double prev = 1.0L;
  long double curr = 1.0L - x;
  if (n == 0) {
    ln = prev;
    lnm1 = 0.0L;
    return;
  }
  for (int k = 1; k < n; ++k) {
    const long double next = ((2.0L * k + 1.0L - x) * curr - k * prev) / (k + 1.0L);
    prev = curr;
    curr = next;
  }
  ln = curr;
  lnm1 = prev;
}

}  // namespace

LaguerreRule gauss_laguerre_nodes(int count) {
  if (count < 1 || count > 256) {
    throw Error(ErrorCode::kCountOutOfRange,
                "gauss_laguerre_nodes: count " + std::to_string(count) + " outside [1, 256]");
  }
  // Golub-Welsch: eigenvalues of the Jacobi matrix seed the nodes.
  Vector diag(count);
  Vector offdiag(std::max(count - 1, 1));
  for (int i = 0; i < count; ++i) diag(i) = 2.0 * i + 1.0;
  for (int i = 1; i < count; ++i) offdiag(i - 1) = static_cast<double>(i);

  std::vector<long double> nodes(static_cast<size_t>(count));
  if (count == 1) {
    nodes[0] = 1.0L;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(diag, offdiag.head(count - 1), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::kConvergenceFailure, "gauss_laguerre_nodes: Jacobi eigensolve");
    }
    for (int i = 0; i < count; ++i) nodes[static_cast<size_t>(i)] = solver.eigenvalues()(i);
  }

  LaguerreRule rule;
  rule.nodes.resize(static_cast<size_t>(count));
  rule.weights.resize(static_cast<size_t>(count));
  rule.log_weights.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    long double x = nodes[static_cast<size_t>(i)];
    // Newton polish on L_n using L_n'(x) = n (L_n - L_{n-1}) / x.
    for (int iter = 0; iter < 8; ++iter) {
      long double ln = 0, lnm1 = 0;
      laguerre_pair(count, x, ln, lnm1);
      const long double derivative = count * (ln - lnm1) / x;
      const long double step = ln / derivative;
      x -= step;
      if (std::fabs(step) <= 4.0L * std::numeric_limits<long double>::epsilon() * x) break;
    }
    long double lnp1 = 0, ln = 0;
    laguerre_pair(count + 1, x, lnp1, ln);
    const long double log_w =
        std::log(x) - 2.0L * (std::log(static_cast<long double>(count) + 1.0L) +
                              std::log(std::fabs(lnp1)));
    rule.nodes[static_cast<size_t>(i)] = static_cast<double>(x);
    rule.log_weights[static_cast<size_t>(i)] = static_cast<double>(log_w);
    rule.weights[static_cast<size_t>(i)] = static_cast<double>(std::exp(log_w));
  }
  return rule;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace dmduq

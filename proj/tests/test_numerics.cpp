#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/LU>

#include "dmduq/error.hpp"
#include "dmduq/numerics.hpp"
#include "oracles.hpp"

using namespace dmduq;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  }
  return a;
}

bool conjugate_closed(const Spectrum& s, double tol) {
  for (const auto& z : s) {
    bool found = false;
    for (const auto& w : s) found = found || std::abs(w - std::conj(z)) <= tol;
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cholesky_logdet of the identity is zero") {
  const auto r = cholesky_logdet(Matrix::Identity(2, 2));
  CHECK(r.log_determinant == doctest::Approx(0.0));
  CHECK(r.factor.dimension() == 2);
}

TEST_CASE("cholesky_logdet of diag(2, 8) is ln 16") {
  Matrix m = Matrix::Zero(2, 2);
  m.diagonal() << 2.0, 8.0;
  CHECK(cholesky_logdet(m).log_determinant == doctest::Approx(std::log(16.0)).epsilon(1e-14));
}

TEST_CASE("cholesky_logdet rejects indefinite, asymmetric and malformed input") {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK(code_of([&] { cholesky_logdet(swap); }) == ErrorCode::kNotPositiveDefinite);

  Matrix skew(2, 2);
  skew << 2, 1, 0.5, 2;
  CHECK(code_of([&] { cholesky_logdet(skew); }) == ErrorCode::kNotSymmetric);

  CHECK(code_of([&] { cholesky_logdet(Matrix::Ones(2, 3)); }) == ErrorCode::kDimensionMismatch);

  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { cholesky_logdet(nan); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("cholesky_logdet symmetrizes drift below 1e-9") {
  Matrix m(2, 2);
  m << 4, 1, 1 + 1e-12, 3;
  const auto r = cholesky_logdet(m);
  CHECK(r.log_determinant == doctest::Approx(std::log(11.0 - 1e-12)).epsilon(1e-13));
}

TEST_CASE("cholesky factor is lower triangular, positive and reconstructs the input") {
  for (Index n : {1, 3, 8, 20}) {
    const Matrix v = oracle::random_spd(n, 100 + static_cast<std::uint64_t>(n));
    const auto r = cholesky_logdet(v);
    const Matrix& l = r.factor.lower;
    CHECK(l.isLowerTriangular());
    CHECK((l.diagonal().array() > 0.0).all());
    CHECK((l * l.transpose() - v).norm() <= 1e-10 * v.norm());
    CHECK(r.log_determinant == doctest::Approx(std::log(v.determinant())).epsilon(1e-10));
  }
}

TEST_CASE("inverse of an SPD matrix is SPD (100 random instances)") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index n = 1 + static_cast<Index>(seed % 12);
    const Matrix b = random_matrix(n, n, seed);
    const Matrix v = b.transpose() * b + Matrix::Identity(n, n);
    const auto factor = cholesky_logdet(v).factor;
    const Matrix r = spd_inverse(factor);
    CHECK_NOTHROW(cholesky_logdet(r));
    CHECK((r - r.transpose()).norm() == 0.0);
  }
}

TEST_CASE("spd_solve examples") {
  const Vector v = Eigen::Vector2d(3.0, -7.0);
  CHECK((spd_solve(cholesky_logdet(Matrix::Identity(2, 2)).factor, v) - v).norm() == 0.0);

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2.0, 4.0;
  const Vector x = spd_solve(cholesky_logdet(d).factor, Vector(Eigen::Vector2d(2.0, 4.0)));
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));

  CHECK(code_of([&] { spd_solve(cholesky_logdet(d).factor, Vector(Vector::Ones(3))); }) ==
        ErrorCode::kDimensionMismatch);
}

TEST_CASE("spd_solve residual is below 1e-10 up to dimension 64") {
  for (Index n : {5, 16, 33, 64}) {
    const Matrix a = oracle::random_spd(n, 7 + static_cast<std::uint64_t>(n));
    const Vector b = random_matrix(n, 1, 11);
    const Vector x = spd_solve(cholesky_logdet(a).factor, b);
    CHECK((a * x - b).norm() / b.norm() <= 1e-10);
    const Matrix rhs = random_matrix(n, 3, 12);
    const Matrix xs = spd_solve(cholesky_logdet(a).factor, rhs);
    CHECK((a * xs - rhs).norm() / rhs.norm() <= 1e-10);
  }
}

TEST_CASE("eigenvalues of diag(3, 1)") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1.0, 3.0;
  const Spectrum s = eigenvalues(d);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Complex(3.0, 0.0));
  CHECK(s[1] == Complex(1.0, 0.0));
}

TEST_CASE("eigenvalues of the harmonic oscillator matrix order +2i first") {
  Matrix a(2, 2);
  a << 0, 1, -4, 0;
  const Spectrum s = eigenvalues(a);
  CHECK(std::abs(s[0] - Complex(0.0, 2.0)) < 1e-12);
  CHECK(std::abs(s[1] - Complex(0.0, -2.0)) < 1e-12);
}

TEST_CASE("eigenvalue sum equals the trace and spectra are conjugate closed") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index n = 6 + static_cast<Index>(seed % 5);
    const Matrix a = random_matrix(n, n, 500 + seed);
    const Spectrum s = eigenvalues(a);
    REQUIRE(static_cast<Index>(s.size()) == n);
    Complex sum(0.0, 0.0);
    for (const auto& z : s) sum += z;
    CHECK(std::abs(sum.real() - a.trace()) <= 1e-8 * std::max(1.0, std::abs(a.trace())));
    CHECK(std::abs(sum.imag()) <= 1e-8);
    CHECK(conjugate_closed(s, 1e-9));
    for (size_t i = 1; i < s.size(); ++i) CHECK(std::abs(s[i - 1]) >= std::abs(s[i]));
  }
}

TEST_CASE("eigenvalues handles 1x1 and raises on non-finite input or exhausted iterations") {
  Matrix one(1, 1);
  one << -2.5;
  CHECK(eigenvalues(one)[0] == Complex(-2.5, 0.0));

  Matrix nan = Matrix::Identity(3, 3);
  nan(1, 2) = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { eigenvalues(nan); }) == ErrorCode::kInvalidArgument);

  const Matrix a = random_matrix(12, 12, 3);
  CHECK(code_of([&] { eigenvalues(a, 1); }) == ErrorCode::kConvergenceFailure);
}

TEST_CASE("sort_spectrum breaks magnitude ties by imaginary then real part") {
  Spectrum s{{0.0, -1.0}, {-1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.5, 0.0}};
  sort_spectrum(s);
  CHECK(s[0] == Complex(0.0, 1.0));
  CHECK(s[1] == Complex(1.0, 0.0));
  CHECK(s[2] == Complex(-1.0, 0.0));
  CHECK(s[3] == Complex(0.0, -1.0));
  CHECK(s[4] == Complex(0.5, 0.0));
}

TEST_CASE("gauss_laguerre examples") {
  const auto one = gauss_laguerre_nodes(1);
  CHECK(one.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

  const auto two = gauss_laguerre_nodes(2);
  double linear = 0.0;
  for (size_t i = 0; i < 2; ++i) linear += two.weights[i] * two.nodes[i];
  CHECK(linear == doctest::Approx(1.0).epsilon(1e-14));

  const auto rule = gauss_laguerre_nodes(64);
  double quintic = 0.0;
  for (size_t i = 0; i < rule.nodes.size(); ++i) quintic += rule.weights[i] * std::pow(rule.nodes[i], 5);
  CHECK(std::abs(quintic / 120.0 - 1.0) <= 1e-9);
}

TEST_CASE("gauss_laguerre integrates monomials up to degree 2c-1 to 1e-9") {
  for (int count : {1, 2, 3, 5, 8, 16, 32, 64}) {
    const auto rule = gauss_laguerre_nodes(count);
    for (int degree = 0; degree <= 2 * count - 1 && degree <= 120; ++degree) {
      // Sum in the log domain: ln w_i + d ln x_i, compared with ln Gamma(d + 1).
      double log_sum = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < rule.nodes.size(); ++i) {
        log_sum = log_add_exp(log_sum, rule.log_weights[i] + degree * std::log(rule.nodes[i]));
      }
      const double rel = std::expm1(log_sum - std::lgamma(degree + 1.0));
      CAPTURE(count);
      CAPTURE(degree);
      CHECK(std::abs(rel) <= 1e-9);
    }
  }
}

TEST_CASE("gauss_laguerre nodes are positive and increasing; log weights finite") {
  for (int count : {1, 7, 64, 128, 256}) {
    const auto rule = gauss_laguerre_nodes(count);
    REQUIRE(rule.nodes.size() == static_cast<size_t>(count));
    CHECK(rule.nodes.front() > 0.0);
    for (size_t i = 1; i < rule.nodes.size(); ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    for (double lw : rule.log_weights) CHECK(std::isfinite(lw));
    double log_total = -std::numeric_limits<double>::infinity();
    for (double lw : rule.log_weights) log_total = log_add_exp(log_total, lw);
    CHECK(std::abs(log_total) <= 1e-12);
  }
}

TEST_CASE("gauss_laguerre rejects counts outside 1..256") {
  CHECK(code_of([] { gauss_laguerre_nodes(0); }) == ErrorCode::kCountOutOfRange);
  CHECK(code_of([] { gauss_laguerre_nodes(257); }) == ErrorCode::kCountOutOfRange);
}

TEST_CASE("log_add_exp") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_add_exp(-inf, 1.5) == 1.5);
  CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(log_add_exp(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("error codes have stable names and distinct exit statuses") {
  CHECK(error_code_name(ErrorCode::kZeroVariance) == "ZeroVariance");
  CHECK(error_code_name(ErrorCode::kSingularGram) == "SingularGram");
  CHECK(error_exit_status(ErrorCode::kInvalidArgument) == 10);
  CHECK(error_exit_status(ErrorCode::kSchemaVersion) > error_exit_status(ErrorCode::kConfigError));
}

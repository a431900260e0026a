#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "dmduq/error.hpp"
#include "dmduq/operator_moments.hpp"
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

SnapshotSet make_snapshots(const Matrix& x, const Matrix& y) {
  SnapshotSet s;
  s.states = x;
  s.shifted = y;
  s.dt = 0.1;
  return s;
}

NoiseModel isotropic(Index n, double variance) {
  return NoiseModel::diagonal(Vector::Constant(n, variance));
}

}  // namespace

TEST_CASE("dmd_point_estimate on the scalar toy") {
  Matrix x(1, 2);
  x << 1, 2;
  Matrix y(1, 2);
  y << 2, 3;
  const DmdEstimate est = dmd_point_estimate(make_snapshots(x, y));
  Matrix expected(2, 2);
  expected << 0.4, 0.6, 0.8, 1.2;
  CHECK((est.op - expected).cwiseAbs().maxCoeff() <= 1e-15);
  // Rank one: trace 1.6 plus a zero eigenvalue.
  REQUIRE(est.spectrum.size() == 2);
  CHECK(std::abs(est.spectrum[0] - Complex(1.6, 0.0)) <= 1e-14);
  CHECK(std::abs(est.spectrum[1]) == 0.0);
}

TEST_CASE("dmd_point_estimate: projector identity and square invertible case") {
  const auto sys = oracle::random_system(3, 10, 1e-6, 21);
  const Matrix& x = sys.snapshots.states;
  const DmdEstimate self = dmd_point_estimate(make_snapshots(x, x));
  CHECK((x * self.op - x).cwiseAbs().maxCoeff() <= 1e-10);

  Matrix sq(2, 2);
  sq << 2, 1, -1, 3;
  Matrix y(2, 2);
  y << 0.5, 1.5, -2, 0.25;
  const DmdEstimate inv = dmd_point_estimate(make_snapshots(sq, y));
  CHECK((inv.op - sq.inverse() * y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("point spectrum matches a direct eigendecomposition of A") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sys = oracle::random_system(3, 12, 0.02, 300 + seed);
    const DmdEstimate est = dmd_point_estimate(sys.snapshots);
    const Spectrum direct = eigenvalues(est.op);
    REQUIRE(direct.size() == est.spectrum.size());
    for (size_t i = 0; i < direct.size(); ++i) {
      CHECK(std::abs(direct[i] - est.spectrum[i]) <= 1e-8);
    }
  }
}

TEST_CASE("dmd_point_estimate raises SingularGram and accepts a ridge") {
  Matrix x(2, 3);
  x << 1, 2, 3, 2, 4, 6;
  const SnapshotSet s = make_snapshots(x, x);
  CHECK(code_of([&] { dmd_point_estimate(s); }) == ErrorCode::kSingularGram);
  CHECK_NOTHROW(dmd_point_estimate(s, 1e-6));
  const Matrix p = right_pseudoinverse(x, 1e-6);
  CHECK(p.rows() == 3);
  CHECK(p.cols() == 2);
}

TEST_CASE("operator_first_moment: zero pinv moments and dimension errors") {
  const auto sys = oracle::random_system(2, 6, 0.02, 4);
  PinvMoments zero{Matrix::Zero(6, 2), Matrix::Zero(6, 2)};
  const Matrix first = operator_first_moment(zero, sys.snapshots, sys.noise);
  CHECK(first.rows() == 6);
  CHECK(first.cwiseAbs().maxCoeff() == 0.0);
  PinvMoments wrong{Matrix::Zero(5, 2), Matrix::Zero(5, 2)};
  CHECK(code_of([&] { operator_first_moment(wrong, sys.snapshots, sys.noise); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] {
          operator_second_moment(wrong, sys.snapshots, sys.noise, VarianceMode::kCorrected);
        }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("zero-noise collapse at sigma = 1e-8") {
  const auto sys = oracle::random_system(2, 10, 1e-6, 12);
  const OperatorMoments m = estimate_operator_moments(sys.snapshots, isotropic(2, 1e-16));
  const DmdEstimate est = dmd_point_estimate(sys.snapshots);
  CHECK((m.first - est.op).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(m.second_central.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("mode identity: corrected minus paper_literal equals sum_k M2 Y^2") {
  const auto sys = oracle::random_system(3, 12, 0.05, 8);
  const PinvMoments pinv = pinv_moments(sys.snapshots, sys.noise);
  const Matrix corrected =
      operator_second_moment(pinv, sys.snapshots, sys.noise, VarianceMode::kCorrected).values;
  const Matrix literal =
      operator_second_moment(pinv, sys.snapshots, sys.noise, VarianceMode::kPaperLiteral).values;
  const Matrix y2 = sys.snapshots.shifted.cwiseAbs2();
  const Matrix expected = pinv.second_raw * y2;
  const double scale = expected.cwiseAbs().maxCoeff();
  CHECK((corrected - literal - expected).cwiseAbs().maxCoeff() <= 1e-13 * scale);
}

TEST_CASE("paper_literal mode records negative elements; corrected mode is non-negative") {
  bool saw_negative = false;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto sys = oracle::random_system(2 + seed % 2, 8 + 2 * (seed % 3), 0.03, 60 + seed);
    const OperatorMoments corrected = estimate_operator_moments(sys.snapshots, sys.noise);
    CHECK(corrected.second_central.minCoeff() >= -1e-12);
    CHECK(corrected.negative_elements.empty());
    const OperatorMoments literal = estimate_operator_moments(sys.snapshots, sys.noise, {}, 0.0,
                                                              VarianceMode::kPaperLiteral);
    long negatives = 0;
    for (Index i = 0; i < literal.second_central.rows(); ++i) {
      for (Index j = 0; j < literal.second_central.cols(); ++j) {
        negatives += literal.second_central(i, j) < 0.0 ? 1 : 0;
      }
    }
    CHECK(static_cast<long>(literal.negative_elements.size()) == negatives);
    saw_negative = saw_negative || negatives > 0;
  }
  CHECK(saw_negative);
}

TEST_CASE("first moment is linear in the Y means") {
  const auto sys = oracle::random_system(3, 9, 0.02, 5);
  const PinvMoments pinv = pinv_moments(sys.snapshots, sys.noise);
  const Matrix base = operator_first_moment(pinv, sys.snapshots, sys.noise);
  SnapshotSet doubled = sys.snapshots;
  doubled.shifted *= 2.0;
  CHECK(operator_first_moment(pinv, doubled, sys.noise) == 2.0 * base);
  SnapshotSet scaled = sys.snapshots;
  scaled.shifted *= -0.7;
  CHECK((operator_first_moment(pinv, scaled, sys.noise) + 0.7 * base).cwiseAbs().maxCoeff() <=
        1e-14 * base.cwiseAbs().maxCoeff());
}

TEST_CASE("corrected variance matches the product variance of a scalar toy by sampling") {
  Matrix x(1, 2);
  x << 1, 2;
  Matrix y(1, 2);
  y << 2, 3;
  const double s2 = 0.04;
  const SnapshotSet snaps = make_snapshots(x, y);
  const OperatorMoments m = estimate_operator_moments(snaps, isotropic(1, s2));

  // Element (0, 1): x+ from column 0 with V = 4, times y = Y(0, 1) + noise.
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, std::sqrt(s2));
  const long draws = 1000000;
  double sum = 0.0;
  std::vector<double> products(draws);
  for (long i = 0; i < draws; ++i) {
    const double xt = 1.0 + noise(rng);
    const double yv = 3.0 + noise(rng);
    products[i] = xt / (4.0 + xt * xt) * yv;
    sum += products[i];
  }
  const double mean = sum / draws;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double p : products) {
    const double d = (p - mean) * (p - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= draws;
  m4 /= draws;
  const double variance = m2 * draws / (draws - 1.0);
  const double se = std::sqrt((m4 - m2 * m2) / draws);
  CHECK(std::abs(m.second_central(0, 1) - variance) <= 3.0 * se);
  CHECK(std::abs(m.first(0, 1) - mean) <= 3.0 * std::sqrt(m2 / draws));
}

TEST_CASE("estimate_operator_moments is deterministic and thread invariant") {
  const auto sys = oracle::random_system(3, 12, 0.04, 99);
  const OperatorMoments a = estimate_operator_moments(sys.snapshots, sys.noise, {}, 0.0,
                                                      VarianceMode::kCorrected, 1);
  const OperatorMoments b = estimate_operator_moments(sys.snapshots, sys.noise, {}, 0.0,
                                                      VarianceMode::kCorrected, 4);
  const OperatorMoments c = estimate_operator_moments(sys.snapshots, sys.noise, {}, 0.0,
                                                      VarianceMode::kCorrected, 1);
  CHECK(a.first == b.first);
  CHECK(a.second_central == b.second_central);
  CHECK(a.first == c.first);
  CHECK(a.second_central == c.second_central);
  CHECK(a.variance_mode == VarianceMode::kCorrected);
}

TEST_CASE("too few snapshots for the state dimension surfaces SingularV") {
  Matrix x(3, 3);
  x << 1, 0, 2, 0, 1, 1, 1, 1, 0;
  CHECK(code_of([&] { estimate_operator_moments(make_snapshots(x, x), isotropic(3, 0.01)); }) ==
        ErrorCode::kSingularV);
}

TEST_CASE("variance mode names") {
  CHECK(variance_mode_name(VarianceMode::kCorrected) == "corrected");
  CHECK(parse_variance_mode("paper_literal") == VarianceMode::kPaperLiteral);
  CHECK(code_of([] { parse_variance_mode("other"); }) == ErrorCode::kConfigError);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dmduq/error.hpp"
#include "dmduq/monte_carlo.hpp"
#include "dmduq/spectral.hpp"
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

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double total = 0.0;
  for (size_t i = 1; i < x.size(); ++i) total += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return total;
}

std::vector<double> normal_draws(long count, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  std::vector<double> out(static_cast<size_t>(count));
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace

TEST_CASE("eigen_samples of the harmonic oscillator map lambda1 to 2i") {
  Matrix a(2, 2);
  a << 0, 1, -4, 0;
  const EigenSampleSet set = eigen_samples(std::vector<Matrix>(5, a));
  REQUIRE(set.representative_lambda1.size() == 5);
  for (const auto& l : set.representative_lambda1) CHECK(std::abs(l - Complex(0.0, 2.0)) <= 1e-12);
  for (const auto& s : set.samples) CHECK(s.size() == 2);
}

TEST_CASE("eigen_samples of diag(3, 1) has a real lambda1") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 3.0, 1.0;
  const EigenSampleSet set = eigen_samples({d, d});
  CHECK(set.representative_lambda1[0] == Complex(3.0, 0.0));
}

TEST_CASE("representative uses the upper member of the leading pair") {
  CHECK(representative_lambda1({{1.0, -1.0}, {1.0, 1.0}}) == Complex(1.0, 1.0));
  CHECK(representative_lambda1({{0.5, 2.0}, {0.5, -2.0}}) == Complex(0.5, 2.0));
  CHECK(code_of([] { representative_lambda1({}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("random Gaussian instances give conjugate-closed spectra and Im(lambda1) >= 0") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Matrix> instances;
  for (int l = 0; l < 50; ++l) {
    Matrix a(7, 7);
    for (Index j = 0; j < 7; ++j) {
      for (Index i = 0; i < 7; ++i) a(i, j) = normal(rng);
    }
    instances.push_back(a);
  }
  const EigenSampleSet one = eigen_samples(instances, 1);
  const EigenSampleSet many = eigen_samples(instances, 3);
  CHECK(one.samples == many.samples);
  for (size_t l = 0; l < instances.size(); ++l) {
    for (const auto& z : one.samples[l]) {
      const bool closed = std::any_of(one.samples[l].begin(), one.samples[l].end(),
                                      [&](const Complex& w) { return std::abs(w - std::conj(z)) <= 1e-9; });
      CHECK(closed);
    }
    CHECK(one.representative_lambda1[l].imag() >= 0.0);
    CHECK(std::abs(std::abs(one.representative_lambda1[l]) - std::abs(one.samples[l][0])) <= 1e-12);
  }
}

TEST_CASE("eigen_samples validates its input") {
  CHECK(code_of([] { eigen_samples({}); }) == ErrorCode::kTooFewSamples);
  CHECK(code_of([] { eigen_samples({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}); }) ==
        ErrorCode::kDimensionMismatch);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::nan("");
  std::string message;
  try {
    eigen_samples({Matrix::Identity(2, 2), bad});
  } catch (const Error& e) {
    message = e.what();
  }
  CHECK(message.find("instance 1") != std::string::npos);
}

TEST_CASE("eigen_moments: identical samples and the conjugate representative") {
  Matrix a(2, 2);
  a << 0.9, 0.3, -0.3, 0.9;
  const auto moments = eigen_moments(eigen_samples(std::vector<Matrix>(4, a)));
  REQUIRE(moments.size() == 2);
  for (const auto& m : moments) {
    CHECK(m.variance_re == 0.0);
    CHECK(m.variance_im == 0.0);
  }
  CHECK(std::abs(moments[0].mean - Complex(0.9, 0.3)) <= 1e-12);

  EigenSampleSet pair;
  pair.samples = {{{1.0, 1.0}}, {{1.0, -1.0}}};
  pair.representative_lambda1 = {{1.0, 1.0}, {1.0, 1.0}};
  const auto pm = eigen_moments(pair);
  CHECK(pm[0].mean == Complex(1.0, 1.0));
  CHECK(pm[0].variance_im == 0.0);

  EigenSampleSet single;
  single.samples = {{{1.0, 0.0}}};
  single.representative_lambda1 = {{1.0, 0.0}};
  CHECK(code_of([&] { eigen_moments(single); }) == ErrorCode::kTooFewSamples);
}

TEST_CASE("eigen_moments of Gaussian diagonal draws recover the parameters") {
  const long count = 100000;
  const auto re = normal_draws(count, 2.0, 0.3, 1);
  const auto low = normal_draws(count, -0.5, 0.1, 2);
  std::vector<Matrix> instances;
  instances.reserve(count);
  for (long l = 0; l < count; ++l) {
    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << re[l], low[l];
    instances.push_back(d);
  }
  const auto m = eigen_moments(eigen_samples(instances));
  const double n = static_cast<double>(count);
  CHECK(std::abs(m[0].mean.real() - 2.0) <= 3.0 * 0.3 / std::sqrt(n));
  CHECK(std::abs(m[1].mean.real() + 0.5) <= 3.0 * 0.1 / std::sqrt(n));
  // SE of a Gaussian sample variance: sigma^2 sqrt(2 / (N - 1)).
  CHECK(std::abs(m[0].variance_re - 0.09) <= 3.0 * 0.09 * std::sqrt(2.0 / (n - 1.0)));
  CHECK(std::abs(m[1].variance_re - 0.01) <= 3.0 * 0.01 * std::sqrt(2.0 / (n - 1.0)));
  CHECK(m[0].variance_im == 0.0);
}

TEST_CASE("zero-variance moments reproduce the point spectrum exactly") {
  const auto sys = oracle::random_system(2, 8, 0.02, 31);
  const DmdEstimate est = dmd_point_estimate(sys.snapshots);
  const auto inst = sample_operator_instances(est.op, Matrix::Zero(8, 8), 20, 1);
  const EigenSampleSet set = eigen_samples(inst.instances);
  const auto m = eigen_moments(set);
  const Spectrum direct = eigenvalues(est.op);
  for (size_t i = 0; i < m.size(); ++i) {
    CHECK(m[i].variance_re == 0.0);
    CHECK(m[i].variance_im == 0.0);
    if (i > 0) CHECK(m[i].mean == direct[i]);
  }
  CHECK(m[0].mean == representative_lambda1(direct));
}

TEST_CASE("eigen bands and overlap") {
  EigenIndexMoments a{{1.0, 0.5}, 0.01, 0.04};
  const EigenBand band = eigen_band(a);
  CHECK(band.re_low == doctest::Approx(0.8));
  CHECK(band.re_high == doctest::Approx(1.2));
  CHECK(band.im_low == doctest::Approx(0.1));
  CHECK(band.im_high == doctest::Approx(0.9));
  EigenIndexMoments b{{1.3, 0.5}, 0.01, 0.0};
  CHECK(bands_overlap(band, eigen_band(b)));
  EigenIndexMoments c{{1.5, 0.5}, 0.01, 0.0};
  CHECK_FALSE(bands_overlap(band, eigen_band(c)));
  EigenIndexMoments d{{1.0, 2.0}, 0.01, 0.01};
  CHECK_FALSE(bands_overlap(band, eigen_band(d)));
}

TEST_CASE("kde of a single value with unit bandwidth peaks at 1/sqrt(2 pi)") {
  const KdeCurve curve = kde({0.7}, 1.0, 257);
  CHECK(curve.bandwidth == 1.0);
  CHECK(curve.grid.front() == doctest::Approx(0.7 - 4.0));
  CHECK(curve.grid.back() == doctest::Approx(0.7 + 4.0));
  CHECK(curve.grid[128] == doctest::Approx(0.7));
  CHECK(curve.density[128] == doctest::Approx(0.398942280401).epsilon(1e-10));
}

TEST_CASE("kde of symmetric data is symmetric") {
  for (double h : {0.1, 0.7, 3.0}) {
    const KdeCurve curve = kde({-1.0, 1.0}, h, 101);
    for (size_t i = 0; i < curve.grid.size(); ++i) {
      CHECK(std::abs(curve.grid[i] + curve.grid[curve.grid.size() - 1 - i]) <= 1e-12);
      CHECK(std::abs(curve.density[i] - curve.density[curve.grid.size() - 1 - i]) <= 1e-12);
    }
  }
}

TEST_CASE("kde of standard normal draws with auto bandwidth") {
  const auto v = normal_draws(10000, 0.0, 1.0, 42);
  const KdeCurve curve = kde(v);
  CHECK(curve.grid.size() == 256);
  // Evaluate at 0 directly with the chosen bandwidth.
  const KdeCurve at_zero = kde(v, curve.bandwidth, 2);
  double density = 0.0;
  for (double x : v) density += std::exp(-0.5 * x * x / (curve.bandwidth * curve.bandwidth));
  density /= v.size() * curve.bandwidth * std::sqrt(2.0 * M_PI);
  CHECK(std::abs(density / 0.39894 - 1.0) <= 0.1);
  CHECK(at_zero.density.size() == 2);
  const double integral = trapezoid(curve.grid, curve.density);
  CHECK(integral >= 0.98);
  CHECK(integral <= 1.02);
  for (double d : curve.density) CHECK(d >= 0.0);
}

TEST_CASE("silverman bandwidth: reference value, IQR fallback and degenerate data") {
  // sd = 1.290994, IQR (type 7) = 1.5 -> min(sd, 1.5 / 1.34) = 1.119403.
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * 1.5 / 1.34 * std::pow(4.0, -0.2)));
  // Quartiles coincide, so the spread falls back to the standard deviation.
  const std::vector<double> spiky{0, 0, 0, 0, 0, 0, 0, 0, 0, 10};
  const double sd = std::sqrt(10.0);
  CHECK(silverman_bandwidth(spiky) == doctest::Approx(0.9 * sd * std::pow(10.0, -0.2)));
  CHECK(code_of([] { silverman_bandwidth({2.0, 2.0, 2.0}); }) == ErrorCode::kDegenerateData);
  CHECK(code_of([] { kde({2.0, 2.0}); }) == ErrorCode::kDegenerateData);
  CHECK(code_of([] { kde({1.0, 2.0}, -1.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { kde({1.0}); }) == ErrorCode::kTooFewSamples);
}

TEST_CASE("2-D KDE integrates to one and peaks near the mode") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> re(0.8, 0.05);
  std::normal_distribution<double> im(0.4, 0.02);
  std::vector<Complex> values;
  for (int i = 0; i < 5000; ++i) values.emplace_back(re(rng), im(rng));
  const Kde2d k = kde2d(values);
  REQUIRE(k.grid_re.size() == 64);
  REQUIRE(k.grid_im.size() == 64);
  const double dx = k.grid_re[1] - k.grid_re[0];
  const double dy = k.grid_im[1] - k.grid_im[0];
  CHECK(std::abs(k.density.sum() * dx * dy - 1.0) <= 0.02);
  const auto [i, j] = k.peak();
  CHECK(std::abs(k.grid_re[i] - 0.8) <= 2.0 * dx);
  CHECK(std::abs(k.grid_im[j] - 0.4) <= 2.0 * dy);

  const Kde2d fixed = kde2d_on_grid({{0.0, 0.0}}, {0.0}, {0.0}, 1.0, 2.0);
  CHECK(fixed.density(0, 0) == doctest::Approx(1.0 / (2.0 * M_PI * 2.0)));
  const auto g = linear_grid(-1.0, 1.0, 5);
  CHECK(g == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
}

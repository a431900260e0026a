#include "dmduq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmduq/error.hpp"
#include "dmduq/parallel.hpp"

namespace dmduq {

Complex representative_lambda1(const Spectrum& sorted_spectrum) {
  if (sorted_spectrum.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "representative_lambda1: empty spectrum");
  }
  const Complex top = sorted_spectrum.front();
  return top.imag() < 0.0 ? std::conj(top) : top;
}

EigenSampleSet eigen_samples_from_spectra(std::vector<Spectrum> spectra) {
  if (spectra.empty()) throw Error(ErrorCode::kTooFewSamples, "eigen_samples: no samples");
  const size_t m = spectra.front().size();
  EigenSampleSet out;
  out.representative_lambda1.reserve(spectra.size());
  for (const auto& s : spectra) {
    if (s.size() != m) {
      throw Error(ErrorCode::kDimensionMismatch, "eigen_samples: spectra of unequal length");
    }
    out.representative_lambda1.push_back(representative_lambda1(s));
  }
  out.samples = std::move(spectra);
  return out;
}

EigenSampleSet eigen_samples(const std::vector<Matrix>& instances, int threads) {
  if (instances.empty()) throw Error(ErrorCode::kTooFewSamples, "eigen_samples: no instances");
  const Index m = instances.front().rows();
  for (const auto& a : instances) {
    if (a.rows() != m || a.cols() != m) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "eigen_samples: instances must be square and of equal size");
    }
  }
  std::vector<Spectrum> spectra(instances.size());
  parallel_for(instances.size(), threads > 0 ? threads : default_thread_count(), [&](size_t i) {
    try {
      spectra[i] = eigenvalues(instances[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "instance " + std::to_string(i) + ": " + e.what());
    }
  });
  return eigen_samples_from_spectra(std::move(spectra));
}

std::vector<EigenIndexMoments> eigen_moments(const EigenSampleSet& set) {
  const size_t count = set.samples.size();
  if (count < 2) throw Error(ErrorCode::kTooFewSamples, "eigen_moments: need at least 2 samples");
  const size_t m = set.samples.front().size();
  std::vector<EigenIndexMoments> out(m);
  const double n = static_cast<double>(count);
  for (size_t j = 0; j < m; ++j) {
    auto value = [&](size_t l) {
      return j == 0 ? set.representative_lambda1[l] : set.samples[l][j];
    };
    // Deviations from the first sample: identical samples give an exact mean
    // and a variance of exactly zero.
    const Complex origin = value(0);
    Complex shift(0.0, 0.0);
    for (size_t l = 0; l < count; ++l) shift += value(l) - origin;
    shift /= n;
    const Complex mean = origin + shift;
    double ss_re = 0.0;
    double ss_im = 0.0;
    for (size_t l = 0; l < count; ++l) {
      const Complex d = value(l) - origin - shift;
      ss_re += d.real() * d.real();
      ss_im += d.imag() * d.imag();
    }
    out[j] = {mean, ss_re / (n - 1.0), ss_im / (n - 1.0)};
  }
  return out;
}

EigenBand eigen_band(const EigenIndexMoments& moments, double width) {
  const double dr = width * std::sqrt(moments.variance_re);
  const double di = width * std::sqrt(moments.variance_im);
  return {moments.mean.real() - dr, moments.mean.real() + dr, moments.mean.imag() - di,
          moments.mean.imag() + di};
}

bool bands_overlap(const EigenBand& a, const EigenBand& b) {
  return a.re_low <= b.re_high && b.re_low <= a.re_high && a.im_low <= b.im_high &&
         b.im_low <= a.im_high;
}

namespace {

void check_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "kde: non-finite value");
  }
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double checked_bandwidth(const std::vector<double>& values, std::optional<double> bandwidth) {
  if (bandwidth) {
    if (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth)) {
      throw Error(ErrorCode::kInvalidArgument, "kde: bandwidth must be positive");
    }
    return *bandwidth;
  }
  return silverman_bandwidth(values);
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::kTooFewSamples, "silverman_bandwidth: need at least 2 values");
  }
  check_finite(values);
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back() || !(sd > 0.0)) {
    throw Error(ErrorCode::kDegenerateData, "kde: all values identical, bandwidth undefined");
  }
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double> linear_grid(double low, double high, int points) {
  if (points < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs at least 2 points");
  std::vector<double> grid(static_cast<size_t>(points));
  const double step = (high - low) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<size_t>(i)] = low + step * i;
  grid.back() = high;
  return grid;
}

KdeCurve kde(const std::vector<double>& values, std::optional<double> bandwidth, int grid_points) {
  if (values.empty() || (!bandwidth && values.size() < 2)) {
    throw Error(ErrorCode::kTooFewSamples, "kde: need at least 2 values for automatic bandwidth");
  }
  check_finite(values);
  KdeCurve out;
  out.bandwidth = checked_bandwidth(values, bandwidth);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  out.grid = linear_grid(*lo - 4.0 * out.bandwidth, *hi + 4.0 * out.bandwidth, grid_points);
  const double h = out.bandwidth;
  const double norm =
      1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  out.density.resize(out.grid.size());
  for (size_t i = 0; i < out.grid.size(); ++i) {
    double sum = 0.0;
    for (double v : values) {
      const double u = (out.grid[i] - v) / h;
      sum += std::exp(-0.5 * u * u);
    }
    out.density[i] = norm * sum;
  }
  return out;
}

std::pair<Index, Index> Kde2d::peak() const {
  Index best_i = 0;
  Index best_j = 0;
  for (Index j = 0; j < density.cols(); ++j) {
    for (Index i = 0; i < density.rows(); ++i) {
      if (density(i, j) > density(best_i, best_j)) {
        best_i = i;
        best_j = j;
      }
    }
  }
  return {best_i, best_j};
}

Kde2d kde2d_on_grid(const std::vector<Complex>& values, std::vector<double> grid_re,
                    std::vector<double> grid_im, double bandwidth_re, double bandwidth_im) {
  if (values.empty()) throw Error(ErrorCode::kTooFewSamples, "kde2d: no values");
  if (!(bandwidth_re > 0.0) || !(bandwidth_im > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kde2d: bandwidths must be positive");
  }
  const Index nr = static_cast<Index>(grid_re.size());
  const Index ni = static_cast<Index>(grid_im.size());
  const Index count = static_cast<Index>(values.size());
  // Kernel factors per axis; the density is their product summed over samples.
  Matrix kr(nr, count);
  Matrix ki(ni, count);
  for (Index l = 0; l < count; ++l) {
    const Complex v = values[static_cast<size_t>(l)];
    for (Index i = 0; i < nr; ++i) {
      const double u = (grid_re[static_cast<size_t>(i)] - v.real()) / bandwidth_re;
      kr(i, l) = std::exp(-0.5 * u * u);
    }
    for (Index j = 0; j < ni; ++j) {
      const double u = (grid_im[static_cast<size_t>(j)] - v.imag()) / bandwidth_im;
      ki(j, l) = std::exp(-0.5 * u * u);
    }
  }
  Kde2d out;
  out.density = kr * ki.transpose();
  out.density /= static_cast<double>(count) * 2.0 * std::numbers::pi * bandwidth_re * bandwidth_im;
  out.grid_re = std::move(grid_re);
  out.grid_im = std::move(grid_im);
  out.bandwidth_re = bandwidth_re;
  out.bandwidth_im = bandwidth_im;
  return out;
}

Kde2d kde2d(const std::vector<Complex>& values, std::optional<double> bandwidth_re,
            std::optional<double> bandwidth_im, int grid_points) {
  if (values.empty() || ((!bandwidth_re || !bandwidth_im) && values.size() < 2)) {
    throw Error(ErrorCode::kTooFewSamples, "kde2d: need at least 2 values");
  }
  std::vector<double> re(values.size());
  std::vector<double> im(values.size());
  for (size_t l = 0; l < values.size(); ++l) {
    re[l] = values[l].real();
    im[l] = values[l].imag();
  }
  check_finite(re);
  check_finite(im);
  const double hr = checked_bandwidth(re, bandwidth_re);
  const double hi = checked_bandwidth(im, bandwidth_im);
  const auto [re_lo, re_hi] = std::minmax_element(re.begin(), re.end());
  const auto [im_lo, im_hi] = std::minmax_element(im.begin(), im.end());
  return kde2d_on_grid(values, linear_grid(*re_lo - 4.0 * hr, *re_hi + 4.0 * hr, grid_points),
                       linear_grid(*im_lo - 4.0 * hi, *im_hi + 4.0 * hi, grid_points), hr, hi);
}

}  // namespace dmduq

#pragma once

#include <optional>
#include <vector>

#include "dmduq/numerics.hpp"

namespace dmduq {

// Eigenvalues are matched across samples by sorted index (see sort_spectrum),
// not by continuity. Near-degenerate spectra can therefore swap identities
// between samples.
struct EigenSampleSet {
  std::vector<Spectrum> samples;           // N rows of m sorted eigenvalues
  std::vector<Complex> representative_lambda1;  // largest eigenvalue with Im >= 0
};

// Upper member of the conjugate pair containing spectrum[0].
Complex representative_lambda1(const Spectrum& sorted_spectrum);

EigenSampleSet eigen_samples(const std::vector<Matrix>& instances, int threads = 0);
EigenSampleSet eigen_samples_from_spectra(std::vector<Spectrum> spectra);

struct EigenIndexMoments {
  Complex mean;
  double variance_re = 0.0;  // 1/(N-1)
  double variance_im = 0.0;
};

// Index 0 uses the lambda1 representative; other indices use the sorted rows.
std::vector<EigenIndexMoments> eigen_moments(const EigenSampleSet& set);

struct EigenBand {
  double re_low, re_high, im_low, im_high;  // mean -/+ width * sqrt(variance)
};
EigenBand eigen_band(const EigenIndexMoments& moments, double width = 2.0);
bool bands_overlap(const EigenBand& a, const EigenBand& b);

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

// 0.9 * min(sd, IQR/1.34) * N^(-1/5); falls back to sd when IQR is zero.
// Raises DegenerateData when all values are identical.
double silverman_bandwidth(const std::vector<double>& values);

// Gaussian kernel density on grid_points points spanning [min - 4h, max + 4h].
// With an explicit bandwidth a single value is accepted.
KdeCurve kde(const std::vector<double>& values, std::optional<double> bandwidth = std::nullopt,
             int grid_points = 256);

struct Kde2d {
  std::vector<double> grid_re;
  std::vector<double> grid_im;
  Matrix density;  // density(i, j) at (grid_re[i], grid_im[j])
  double bandwidth_re = 0.0;
  double bandwidth_im = 0.0;

  // Grid indices (i, j) of the maximum density; first maximum in column-major order.
  std::pair<Index, Index> peak() const;
};

// Uniform grid of `points` values over [low, high].
std::vector<double> linear_grid(double low, double high, int points);

// Product-kernel density evaluated on the given axes.
Kde2d kde2d_on_grid(const std::vector<Complex>& values, std::vector<double> grid_re,
                    std::vector<double> grid_im, double bandwidth_re, double bandwidth_im);

// Per-axis Silverman bandwidths (or explicit ones); axes span the data +/- 4h.
Kde2d kde2d(const std::vector<Complex>& values, std::optional<double> bandwidth_re = std::nullopt,
            std::optional<double> bandwidth_im = std::nullopt, int grid_points = 64);

}  // namespace dmduq

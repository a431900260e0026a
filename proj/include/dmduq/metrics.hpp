#pragma once

#include <vector>

#include "dmduq/numerics.hpp"

namespace dmduq {

struct ComparisonReport {
  double rmse = 0.0;
  double mae = 0.0;
  double frobenius = 0.0;  // of the difference
  double cosine = 0.0;     // of the vectorized matrices, in [-1, 1]
  Index rows = 0;
  Index cols = 0;
};

// Raises ShapeMismatch on unequal shapes and ZeroNormCosine when either
// matrix is zero.
ComparisonReport compare(const Matrix& estimated, const Matrix& reference);

// (v - min) / (max - min); raises ConstantInput when max == min.
std::vector<double> min_max_normalize(const std::vector<double>& values);

// Elements at indices 0, stride, 2 * stride, ...
std::vector<double> decimate(const std::vector<double>& values, long stride);

// Column-major flattening, matching Eigen storage.
std::vector<double> flatten(const Matrix& matrix);

}  // namespace dmduq

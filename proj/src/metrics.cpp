#include "dmduq/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dmduq/error.hpp"

namespace dmduq {

ComparisonReport compare(const Matrix& estimated, const Matrix& reference) {
  if (estimated.rows() != reference.rows() || estimated.cols() != reference.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "compare: shapes " + std::to_string(estimated.rows()) + "x" +
                    std::to_string(estimated.cols()) + " and " +
                    std::to_string(reference.rows()) + "x" + std::to_string(reference.cols()));
  }
  if (estimated.size() == 0) throw Error(ErrorCode::kShapeMismatch, "compare: empty matrices");
  if (!estimated.allFinite() || !reference.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "compare: non-finite entries");
  }
  const double est_norm = estimated.norm();
  const double ref_norm = reference.norm();
  if (est_norm == 0.0 || ref_norm == 0.0) {
    throw Error(ErrorCode::kZeroNormCosine, "compare: cosine undefined for a zero matrix");
  }
  const Matrix diff = estimated - reference;
  const double count = static_cast<double>(diff.size());
  ComparisonReport out;
  out.rows = estimated.rows();
  out.cols = estimated.cols();
  out.frobenius = diff.norm();
  out.rmse = out.frobenius / std::sqrt(count);
  out.mae = diff.cwiseAbs().sum() / count;
  const double cosine = estimated.cwiseProduct(reference).sum() / (est_norm * ref_norm);
  out.cosine = std::clamp(cosine, -1.0, 1.0);
  return out;
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::kConstantInput, "min_max_normalize: empty input");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double low = *lo;
  const double range = *hi - low;
  if (!(range > 0.0)) throw Error(ErrorCode::kConstantInput, "min_max_normalize: max == min");
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - low) / range;
  return out;
}

std::vector<double> decimate(const std::vector<double>& values, long stride) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "decimate: stride must be >= 1");
  std::vector<double> out;
  out.reserve(values.size() / static_cast<size_t>(stride) + 1);
  for (size_t i = 0; i < values.size(); i += static_cast<size_t>(stride)) out.push_back(values[i]);
  return out;
}

std::vector<double> flatten(const Matrix& matrix) {
  return std::vector<double>(matrix.data(), matrix.data() + matrix.size());
}

}  // namespace dmduq

#include "dmduq/data_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "dmduq/error.hpp"

namespace dmduq {

NoiseModel NoiseModel::diagonal(const Vector& variances) {
  if (variances.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "NoiseModel: empty variance vector");
  }
  for (Index k = 0; k < variances.size(); ++k) {
    if (!(variances(k) > 0.0) || !std::isfinite(variances(k))) {
      throw Error(ErrorCode::kZeroVariance,
                  "NoiseModel: variance of state " + std::to_string(k) +
                      " must be finite and strictly positive");
    }
  }
  NoiseModel model;
  model.variances_ = variances;
  return model;
}

NoiseModel NoiseModel::full(const Matrix& covariance) {
  const auto chol = cholesky_logdet(covariance);  // rejects non-SPD input
  (void)chol;
  NoiseModel model = diagonal(covariance.diagonal());
  model.full_covariance_ = 0.5 * (covariance + covariance.transpose());
  return model;
}

bool NoiseModel::is_diagonal() const {
  if (!full_covariance_) return true;
  const Matrix& c = *full_covariance_;
  Matrix off = c;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() == 0.0;
}

Matrix NoiseModel::covariance() const {
  if (full_covariance_) return *full_covariance_;
  return variances_.asDiagonal();
}

SnapshotSet build_snapshots(const RawTrajectory& trajectory) {
  const Index n = trajectory.state_count();
  const Index columns = trajectory.sample_count();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "build_snapshots: no states");
  if (columns < 3) {
    throw Error(ErrorCode::kTooFewSnapshots,
                "build_snapshots: need at least 3 samples, got " + std::to_string(columns));
  }
  if (static_cast<Index>(trajectory.times.size()) != columns) {
    throw Error(ErrorCode::kDimensionMismatch, "build_snapshots: times/samples length mismatch");
  }
  if (!trajectory.samples.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "build_snapshots: non-finite sample");
  }
  const auto& t = trajectory.times;
  const double dt = (t.back() - t.front()) / static_cast<double>(columns - 1);
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::kNonUniformSampling, "build_snapshots: times not increasing");
  }
  for (size_t i = 1; i < t.size(); ++i) {
    const double step = t[i] - t[i - 1];
    if (!(step > 0.0) || std::abs(step - dt) > 1e-9 * dt) {
      throw Error(ErrorCode::kNonUniformSampling,
                  "build_snapshots: irregular spacing at sample " + std::to_string(i));
    }
  }
  SnapshotSet set;
  set.states = trajectory.samples.leftCols(columns - 1);
  set.shifted = trajectory.samples.rightCols(columns - 1);
  set.dt = dt;
  set.state_names = trajectory.state_names;
  if (set.state_names.empty()) {
    for (Index k = 0; k < n; ++k) set.state_names.push_back("x" + std::to_string(k + 1));
  }
  return set;
}

NoiseModel estimate_noise(const RawTrajectory& trajectory, double t_start, double t_end) {
  const Index n = trajectory.state_count();
  std::vector<Index> inside;
  for (size_t i = 0; i < trajectory.times.size(); ++i) {
    const double t = trajectory.times[i];
    if (t >= t_start && t <= t_end) inside.push_back(static_cast<Index>(i));
  }
  if (inside.size() < 2) {
    throw Error(ErrorCode::kEmptyWindow, "estimate_noise: window [" + format_double(t_start) +
                                             ", " + format_double(t_end) + "] holds " +
                                             std::to_string(inside.size()) + " samples");
  }
  const double count = static_cast<double>(inside.size());
  Vector variances(n);
  for (Index k = 0; k < n; ++k) {
    const double first = trajectory.samples(k, inside.front());
    bool constant = true;
    double mean = 0.0;
    for (Index i : inside) {
      const double v = trajectory.samples(k, i);
      constant = constant && v == first;
      mean += v;
    }
    mean /= count;
    double ss = 0.0;
    for (Index i : inside) {
      const double d = trajectory.samples(k, i) - mean;
      ss += d * d;
    }
    variances(k) = ss / (count - 1.0);
    if (constant || !(variances(k) > 0.0)) {
      const std::string name =
          k < static_cast<Index>(trajectory.state_names.size()) ? trajectory.state_names[k]
                                                                : std::to_string(k);
      throw Error(ErrorCode::kZeroVariance,
                  "estimate_noise: state '" + name + "' is constant over the window");
    }
  }
  return NoiseModel::full(Matrix(variances.asDiagonal()));
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void parse_error(size_t row, size_t column, const std::string& what) {
  throw Error(ErrorCode::kParseError, "csv row " + std::to_string(row) + ", column " +
                                          std::to_string(column) + ": " + what);
}

}  // namespace

RawTrajectory read_csv(std::istream& in) {
  std::string line;
  size_t row = 0;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kHeaderMismatch, "csv: missing header row");
  }
  ++row;
  const auto header = split_fields(trim(line));
  if (header.size() < 2 || trim(header[0]) != "time") {
    throw Error(ErrorCode::kHeaderMismatch,
                "csv: header must be \"time,<name1>,...,<nameN>\"");
  }
  RawTrajectory trajectory;
  for (size_t c = 1; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name.empty()) {
      throw Error(ErrorCode::kHeaderMismatch, "csv: empty state name in column " +
                                                  std::to_string(c + 1));
    }
    trajectory.state_names.emplace_back(name);
  }
  const size_t n = trajectory.state_names.size();

  std::vector<double> values;
  while (std::getline(in, line)) {
    ++row;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_fields(content);
    if (fields.size() != n + 1) {
      const size_t column = fields.size() < n + 1 ? fields.size() + 1 : n + 2;
      parse_error(row, column,
                  "expected " + std::to_string(n + 1) + " fields, found " +
                      std::to_string(fields.size()));
    }
    for (size_t c = 0; c < fields.size(); ++c) {
      const auto field = trim(fields[c]);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
          !std::isfinite(value)) {
        parse_error(row, c + 1, "not a finite number: '" + std::string(field) + "'");
      }
      if (c == 0) {
        trajectory.times.push_back(value);
      } else {
        values.push_back(value);
      }
    }
  }
  const Index columns = static_cast<Index>(trajectory.times.size());
  trajectory.samples.resize(static_cast<Index>(n), columns);
  for (Index i = 0; i < columns; ++i) {
    for (size_t k = 0; k < n; ++k) {
      trajectory.samples(static_cast<Index>(k), i) = values[static_cast<size_t>(i) * n + k];
    }
  }
  return trajectory;
}

void write_csv(const RawTrajectory& trajectory, std::ostream& out) {
  const Index n = trajectory.state_count();
  if (static_cast<Index>(trajectory.times.size()) != trajectory.sample_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "write_csv: times/samples length mismatch");
  }
  out << "time";
  for (Index k = 0; k < n; ++k) {
    if (k < static_cast<Index>(trajectory.state_names.size())) {
      out << ',' << trajectory.state_names[static_cast<size_t>(k)];
    } else {
      out << ",x" << (k + 1);
    }
  }
  out << '\n';
  for (Index i = 0; i < trajectory.sample_count(); ++i) {
    out << format_double(trajectory.times[static_cast<size_t>(i)]);
    for (Index k = 0; k < n; ++k) out << ',' << format_double(trajectory.samples(k, i));
    out << '\n';
  }
}

RawTrajectory load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  return read_csv(in);
}

void save_csv(const RawTrajectory& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  write_csv(trajectory, out);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

}  // namespace dmduq

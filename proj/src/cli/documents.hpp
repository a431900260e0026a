#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmduq/monte_carlo.hpp"
#include "dmduq/operator_moments.hpp"
#include "dmduq/spectral.hpp"

namespace dmduq::cli {

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr int kSchemaMajor = 1;
inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Writes a top-level JSON object field by field so that large matrices are
// streamed row by row instead of being held as a JSON tree.
class DocumentWriter {
 public:
  explicit DocumentWriter(std::ostream& out);
  void field(const std::string& key, const Json& value);
  void matrix(const std::string& key, const Matrix& value);
  void finish();

 private:
  void key(const std::string& name);
  std::ostream& out_;
  bool first_ = true;
};

Json matrix_to_json(const Matrix& value);
Matrix matrix_from_json(const Json& value, const std::string& name);
Json complex_list_to_json(const std::vector<Complex>& values);
std::vector<Complex> complex_list_from_json(const Json& value, const std::string& name);

// Opens `path`, calls `body`, and raises IoError if anything fails.
void write_file(const std::string& path, const std::function<void(std::ostream&)>& body);

// Parses a versioned document and checks its kind and schema major version.
Json read_document(const std::string& path, const std::string& kind);

struct MomentsDocument {
  Json metadata;
  VarianceMode variance_mode = VarianceMode::kCorrected;
  Matrix pinv_first;
  Matrix pinv_second_raw;
  Matrix operator_first;
  Matrix operator_second;
  Matrix point_estimate;
  Spectrum point_spectrum;
  std::vector<std::pair<Index, Index>> negative_elements;
};

void write_moments(const std::string& path, const MomentsDocument& doc);
MomentsDocument read_moments(const std::string& path);

struct McDocument {
  Json metadata;
  McSummary summary;  // eigen_samples are not persisted
  std::vector<Complex> lambda1;
  std::vector<EigenIndexMoments> index_moments;
};

void write_mc(const std::string& path, const McDocument& doc);
McDocument read_mc(const std::string& path);

}  // namespace dmduq::cli

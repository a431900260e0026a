#include "documents.hpp"

#include <fstream>
#include <ostream>

#include "dmduq/error.hpp"

namespace dmduq::cli {

namespace {

[[noreturn]] void parse_error(const std::string& message) {
  throw Error(ErrorCode::kParseError, message);
}

const Json& member(const Json& object, const std::string& key, const std::string& where) {
  if (!object.is_object() || !object.contains(key)) {
    parse_error(where + ": missing field '" + key + "'");
  }
  return object.at(key);
}

double as_number(const Json& value, const std::string& name) {
  if (!value.is_number()) parse_error(name + ": expected a number");
  return value.get<double>();
}

long as_integer(const Json& value, const std::string& name) {
  if (!value.is_number_integer()) parse_error(name + ": expected an integer");
  return value.get<long>();
}

Json index_moments_to_json(const std::vector<EigenIndexMoments>& moments) {
  Json out = Json::array();
  for (const auto& m : moments) {
    out.push_back({{"mean", {m.mean.real(), m.mean.imag()}},
                   {"variance_re", m.variance_re},
                   {"variance_im", m.variance_im}});
  }
  return out;
}

}  // namespace

DocumentWriter::DocumentWriter(std::ostream& out) : out_(out) { out_ << "{"; }

void DocumentWriter::key(const std::string& name) {
  out_ << (first_ ? "\n" : ",\n") << Json(name).dump() << ": ";
  first_ = false;
}

void DocumentWriter::field(const std::string& name, const Json& value) {
  key(name);
  out_ << value.dump();
}

void DocumentWriter::matrix(const std::string& name, const Matrix& value) {
  key(name);
  out_ << "{\"rows\": " << value.rows() << ", \"cols\": " << value.cols() << ", \"data\": [";
  for (Index i = 0; i < value.rows(); ++i) {
    out_ << (i == 0 ? "\n  [" : ",\n  [");
    for (Index j = 0; j < value.cols(); ++j) {
      if (j > 0) out_ << ",";
      out_ << Json(value(i, j)).dump();
    }
    out_ << "]";
  }
  out_ << "]}";
}

void DocumentWriter::finish() { out_ << "\n}\n"; }

Json matrix_to_json(const Matrix& value) {
  Json data = Json::array();
  for (Index i = 0; i < value.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < value.cols(); ++j) row.push_back(value(i, j));
    data.push_back(std::move(row));
  }
  return {{"rows", value.rows()}, {"cols", value.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& value, const std::string& name) {
  const long rows = as_integer(member(value, "rows", name), name + ".rows");
  const long cols = as_integer(member(value, "cols", name), name + ".cols");
  const Json& data = member(value, "data", name);
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<long>(data.size()) != rows) {
    parse_error(name + ": data does not match rows");
  }
  Matrix out(rows, cols);
  for (long i = 0; i < rows; ++i) {
    const Json& row = data[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<long>(row.size()) != cols) {
      parse_error(name + ": row " + std::to_string(i) + " does not match cols");
    }
    for (long j = 0; j < cols; ++j) {
      out(i, j) = as_number(row[static_cast<size_t>(j)], name);
    }
  }
  return out;
}

Json complex_list_to_json(const std::vector<Complex>& values) {
  Json out = Json::array();
  for (const auto& v : values) out.push_back({v.real(), v.imag()});
  return out;
}

std::vector<Complex> complex_list_from_json(const Json& value, const std::string& name) {
  if (!value.is_array()) parse_error(name + ": expected an array");
  std::vector<Complex> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_array() || v.size() != 2) parse_error(name + ": expected [re, im] pairs");
    out.emplace_back(as_number(v[0], name), as_number(v[1], name));
  }
  return out;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

Json read_document(const std::string& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    parse_error(path + ": invalid JSON: " + e.what());
  }
  const Json& version = member(root, "schema_version", path);
  if (!version.is_string()) parse_error(path + ": schema_version must be a string");
  const std::string text = version.get<std::string>();
  const auto dot = text.find('.');
  const std::string major = text.substr(0, dot);
  if (major != std::to_string(kSchemaMajor)) {
    throw Error(ErrorCode::kSchemaVersion,
                path + ": unsupported schema_version '" + text + "' (supported major " +
                    std::to_string(kSchemaMajor) + ")");
  }
  const Json& found = member(root, "kind", path);
  if (!found.is_string() || found.get<std::string>() != kind) {
    parse_error(path + ": expected a '" + kind + "' document");
  }
  return root;
}

void write_moments(const std::string& path, const MomentsDocument& doc) {
  write_file(path, [&](std::ostream& out) {
    DocumentWriter w(out);
    w.field("schema_version", kSchemaVersion);
    w.field("kind", "moments");
    w.field("metadata", doc.metadata);
    w.field("variance_mode", variance_mode_name(doc.variance_mode));
    Json negative = Json::array();
    for (const auto& [i, j] : doc.negative_elements) negative.push_back({i, j});
    w.field("negative_elements", negative);
    w.field("point_spectrum", complex_list_to_json(doc.point_spectrum));
    w.matrix("pinv_first", doc.pinv_first);
    w.matrix("pinv_second_raw", doc.pinv_second_raw);
    w.matrix("operator_first", doc.operator_first);
    w.matrix("operator_second", doc.operator_second);
    w.matrix("point_estimate", doc.point_estimate);
    w.finish();
  });
}

MomentsDocument read_moments(const std::string& path) {
  const Json root = read_document(path, "moments");
  MomentsDocument doc;
  doc.metadata = member(root, "metadata", path);
  const Json& mode = member(root, "variance_mode", path);
  if (!mode.is_string()) parse_error(path + ": variance_mode must be a string");
  doc.variance_mode = parse_variance_mode(mode.get<std::string>());
  for (const auto& e : member(root, "negative_elements", path)) {
    if (!e.is_array() || e.size() != 2) parse_error(path + ": bad negative_elements entry");
    doc.negative_elements.emplace_back(as_integer(e[0], "negative_elements"),
                                       as_integer(e[1], "negative_elements"));
  }
  doc.point_spectrum = complex_list_from_json(member(root, "point_spectrum", path),
                                              "point_spectrum");
  doc.pinv_first = matrix_from_json(member(root, "pinv_first", path), "pinv_first");
  doc.pinv_second_raw = matrix_from_json(member(root, "pinv_second_raw", path), "pinv_second_raw");
  doc.operator_first = matrix_from_json(member(root, "operator_first", path), "operator_first");
  doc.operator_second = matrix_from_json(member(root, "operator_second", path), "operator_second");
  doc.point_estimate = matrix_from_json(member(root, "point_estimate", path), "point_estimate");
  if (doc.operator_first.rows() != doc.operator_second.rows() ||
      doc.operator_first.cols() != doc.operator_second.cols()) {
    throw Error(ErrorCode::kShapeMismatch, path + ": operator moment shapes differ");
  }
  return doc;
}

void write_mc(const std::string& path, const McDocument& doc) {
  const McSummary& s = doc.summary;
  write_file(path, [&](std::ostream& out) {
    DocumentWriter w(out);
    w.field("schema_version", kSchemaVersion);
    w.field("kind", "mc");
    w.field("metadata", doc.metadata);
    w.field("trials", s.trials);
    w.field("failed_trials", s.failed_trials);
    w.field("lambda1", complex_list_to_json(doc.lambda1));
    w.field("eigen_index_moments", index_moments_to_json(doc.index_moments));
    w.matrix("pinv_mean", s.pinv_mean);
    w.matrix("pinv_mean_se", s.pinv_mean_se);
    w.matrix("pinv_second_raw", s.pinv_second_raw);
    w.matrix("pinv_second_raw_se", s.pinv_second_raw_se);
    w.matrix("operator_mean", s.operator_mean);
    w.matrix("operator_mean_se", s.operator_mean_se);
    w.matrix("operator_variance", s.operator_variance);
    w.matrix("operator_variance_se", s.operator_variance_se);
    w.finish();
  });
}

McDocument read_mc(const std::string& path) {
  const Json root = read_document(path, "mc");
  McDocument doc;
  doc.metadata = member(root, "metadata", path);
  McSummary& s = doc.summary;
  s.trials = as_integer(member(root, "trials", path), "trials");
  s.failed_trials = as_integer(member(root, "failed_trials", path), "failed_trials");
  doc.lambda1 = complex_list_from_json(member(root, "lambda1", path), "lambda1");
  for (const auto& e : member(root, "eigen_index_moments", path)) {
    const auto mean = complex_list_from_json(Json::array({member(e, "mean", path)}), "mean");
    doc.index_moments.push_back({mean.front(),
                                 as_number(member(e, "variance_re", path), "variance_re"),
                                 as_number(member(e, "variance_im", path), "variance_im")});
  }
  auto load = [&](const char* name) { return matrix_from_json(member(root, name, path), name); };
  s.pinv_mean = load("pinv_mean");
  s.pinv_mean_se = load("pinv_mean_se");
  s.pinv_second_raw = load("pinv_second_raw");
  s.pinv_second_raw_se = load("pinv_second_raw_se");
  s.operator_mean = load("operator_mean");
  s.operator_mean_se = load("operator_mean_se");
  s.operator_variance = load("operator_variance");
  s.operator_variance_se = load("operator_variance_se");
  return doc;
}

}  // namespace dmduq::cli

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dmduq/cli.hpp"
#include "dmduq/error.hpp"

namespace dmduq::cli {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::kConfigError, "config: " + message);
}

void reject_unknown(const ordered_json& object, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!object.is_object()) config_error(where + " must be an object");
  for (const auto& item : object.items()) {
    if (!allowed.count(item.key())) {
      config_error("unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
  }
}

template <typename T>
T get_value(const ordered_json& object, const std::string& key, const std::string& where) {
  try {
    return object.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error("'" + where + key + "' has the wrong type");
  }
}

double get_number(const ordered_json& object, const std::string& key, const std::string& where) {
  if (!object.at(key).is_number()) config_error("'" + where + key + "' must be a number");
  return object.at(key).get<double>();
}

long get_integer(const ordered_json& object, const std::string& key, const std::string& where) {
  const auto& v = object.at(key);
  if (!v.is_number_integer()) config_error("'" + where + key + "' must be an integer");
  return v.get<long>();
}

void parse_quadrature(const ordered_json& q, QuadratureConfig& out) {
  reject_unknown(q, "quadrature", {"method", "node_count", "p2_max", "rel_tol", "cross_check"});
  if (q.contains("method")) {
    out.method = parse_quadrature_method(get_value<std::string>(q, "method", "quadrature."));
  }
  if (q.contains("node_count")) {
    out.node_count = static_cast<int>(get_integer(q, "node_count", "quadrature."));
  }
  if (q.contains("p2_max")) out.p2_max = get_number(q, "p2_max", "quadrature.");
  if (q.contains("rel_tol")) out.rel_tol = get_number(q, "rel_tol", "quadrature.");
  if (q.contains("cross_check")) out.cross_check = get_value<bool>(q, "cross_check", "quadrature.");
}

void parse_mc(const ordered_json& q, McConfig& out) {
  reject_unknown(q, "mc", {"trials", "master_seed", "sampling_mode", "collect_eigenvalues"});
  if (q.contains("trials")) out.trials = get_integer(q, "trials", "mc.");
  if (q.contains("master_seed")) {
    const auto& v = q.at("master_seed");
    if (!v.is_number_unsigned()) config_error("'mc.master_seed' must be a nonnegative integer");
    out.master_seed = v.get<std::uint64_t>();
  }
  if (q.contains("sampling_mode")) {
    out.sampling_mode = parse_sampling_mode(get_value<std::string>(q, "sampling_mode", "mc."));
  }
  if (q.contains("collect_eigenvalues")) {
    out.collect_eigenvalues = get_value<bool>(q, "collect_eigenvalues", "mc.");
  }
}

void parse_kde(const ordered_json& q, KdeConfig& out) {
  reject_unknown(q, "kde", {"bandwidth", "grid_points"});
  if (q.contains("bandwidth")) {
    const auto& v = q.at("bandwidth");
    if (v.is_string() && v.get<std::string>() == "auto") {
      out.bandwidth.reset();
    } else if (v.is_number()) {
      out.bandwidth = v.get<double>();
    } else {
      config_error("'kde.bandwidth' must be \"auto\" or a number");
    }
  }
  if (q.contains("grid_points")) {
    out.grid_points = static_cast<int>(get_integer(q, "grid_points", "kde."));
  }
}

}  // namespace

void PipelineConfig::validate() const {
  quadrature.validate();
  mc.validate();
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) config_error("ridge must be >= 0");
  if (kde.bandwidth && !(*kde.bandwidth > 0.0)) config_error("kde.bandwidth must be > 0");
  if (kde.grid_points < 2 || kde.grid_points > 4096) {
    config_error("kde.grid_points must be in [2, 4096]");
  }
  if (decimate_stride < 1) config_error("decimate_stride must be >= 1");
}

PipelineConfig parse_config(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(root, "",
                 {"quadrature", "variance_mode", "mc", "ridge", "kde", "decimate_stride"});
  PipelineConfig out;
  if (root.contains("quadrature")) parse_quadrature(root.at("quadrature"), out.quadrature);
  if (root.contains("variance_mode")) {
    out.variance_mode = parse_variance_mode(get_value<std::string>(root, "variance_mode", ""));
  }
  if (root.contains("mc")) parse_mc(root.at("mc"), out.mc);
  if (root.contains("ridge")) out.ridge = get_number(root, "ridge", "");
  if (root.contains("kde")) parse_kde(root.at("kde"), out.kde);
  if (root.contains("decimate_stride")) {
    out.decimate_stride = get_integer(root, "decimate_stride", "");
  }
  out.validate();
  return out;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const PipelineConfig& config) {
  ordered_json j;
  j["quadrature"] = {{"method", quadrature_method_name(config.quadrature.method)},
                     {"node_count", config.quadrature.node_count},
                     {"p2_max", config.quadrature.p2_max},
                     {"rel_tol", config.quadrature.rel_tol},
                     {"cross_check", config.quadrature.cross_check}};
  j["variance_mode"] = variance_mode_name(config.variance_mode);
  j["mc"] = {{"trials", config.mc.trials},
             {"master_seed", config.mc.master_seed},
             {"sampling_mode", sampling_mode_name(config.mc.sampling_mode)},
             {"collect_eigenvalues", config.mc.collect_eigenvalues}};
  j["ridge"] = config.ridge;
  ordered_json kde;
  if (config.kde.bandwidth) {
    kde["bandwidth"] = *config.kde.bandwidth;
  } else {
    kde["bandwidth"] = "auto";
  }
  kde["grid_points"] = config.kde.grid_points;
  j["kde"] = kde;
  j["decimate_stride"] = config.decimate_stride;
  return j.dump();
}

}  // namespace dmduq::cli

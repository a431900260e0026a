#include <algorithm>
#include <charconv>
#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "documents.hpp"
#include "dmduq/cli.hpp"
#include "dmduq/error.hpp"
#include "dmduq/metrics.hpp"
#include "dmduq/systems.hpp"

namespace dmduq::cli {

namespace {

// Command-line misuse detected after CLI11 parsing succeeded.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::string data;
  std::string config;
  std::string noise_window;
  std::vector<double> noise_variances;
  long row_stride = 1;
};

struct Inputs {
  SnapshotSet snapshots;
  NoiseModel noise;
  PipelineConfig config;
  Json source;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("data", o.data, "Trajectory CSV (time,<state>...)")->required();
  cmd->add_option("--config", o.config, "Pipeline config JSON");
  auto* window = cmd->add_option("--noise-window", o.noise_window,
                                 "Estimate noise variances over t_start:t_end seconds");
  auto* variances = cmd->add_option("--noise-variances", o.noise_variances,
                                    "Comma-separated per-state noise variances")
                        ->delimiter(',');
  window->excludes(variances);
  cmd->add_option("--row-stride", o.row_stride,
                  "Keep every k-th sample before building snapshots")
      ->check(CLI::PositiveNumber);
}

double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw UsageError(what + ": '" + text + "' is not a number");
  return value;
}

RawTrajectory stride_trajectory(const RawTrajectory& trajectory, long stride) {
  if (stride == 1) return trajectory;
  RawTrajectory out;
  out.state_names = trajectory.state_names;
  const Index kept = (trajectory.sample_count() + stride - 1) / stride;
  out.samples.resize(trajectory.state_count(), kept);
  for (Index j = 0; j < kept; ++j) {
    out.samples.col(j) = trajectory.samples.col(j * stride);
    out.times.push_back(trajectory.times[static_cast<size_t>(j * stride)]);
  }
  return out;
}

Inputs load_inputs(const DataOptions& o) {
  Inputs in;
  in.config = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  const RawTrajectory trajectory = load_csv(o.data);
  Json noise_source;
  if (!o.noise_window.empty()) {
    const auto colon = o.noise_window.find(':');
    if (colon == std::string::npos) throw UsageError("--noise-window must be t_start:t_end");
    const double t0 = parse_double(o.noise_window.substr(0, colon), "--noise-window");
    const double t1 = parse_double(o.noise_window.substr(colon + 1), "--noise-window");
    in.noise = estimate_noise(trajectory, t0, t1);
    noise_source = {{"window", {t0, t1}}};
  } else if (!o.noise_variances.empty()) {
    if (static_cast<Index>(o.noise_variances.size()) != trajectory.state_count()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "--noise-variances has " + std::to_string(o.noise_variances.size()) +
                      " entries for " + std::to_string(trajectory.state_count()) + " states");
    }
    in.noise = NoiseModel::diagonal(
        Eigen::Map<const Vector>(o.noise_variances.data(), trajectory.state_count()));
    noise_source = "explicit";
  } else {
    throw UsageError("one of --noise-window or --noise-variances is required");
  }
  in.snapshots = build_snapshots(stride_trajectory(trajectory, o.row_stride));
  const auto& v = in.noise.variances();
  in.source = {{"data", o.data},
               {"n", in.snapshots.n()},
               {"m", in.snapshots.m()},
               {"dt", in.snapshots.dt},
               {"row_stride", o.row_stride},
               {"state_names", in.snapshots.state_names},
               {"noise", {{"source", noise_source},
                          {"variances", std::vector<double>(v.data(), v.data() + v.size())}}}};
  return in;
}

Json metadata(const Inputs& in) {
  return {{"tool", "dmduq"},
          {"version", kToolVersion},
          {"config", Json::parse(config_to_json(in.config))},
          {"source", in.source}};
}

MomentsDocument compute_moments(const Inputs& in) {
  const OperatorMoments moments = estimate_operator_moments(
      in.snapshots, in.noise, in.config.quadrature, in.config.ridge, in.config.variance_mode);
  const DmdEstimate point = dmd_point_estimate(in.snapshots, in.config.ridge);
  MomentsDocument doc;
  doc.metadata = metadata(in);
  doc.variance_mode = moments.variance_mode;
  doc.pinv_first = moments.pinv.first;
  doc.pinv_second_raw = moments.pinv.second_raw;
  doc.operator_first = moments.first;
  doc.operator_second = moments.second_central;
  doc.point_estimate = point.op;
  doc.point_spectrum = point.spectrum;
  doc.negative_elements = moments.negative_elements;
  return doc;
}

McDocument compute_mc(const Inputs& in) {
  McDocument doc;
  doc.metadata = metadata(in);
  doc.summary = run_mc(in.snapshots, in.noise, in.config.mc, in.config.ridge);
  if (in.config.mc.collect_eigenvalues) {
    const EigenSampleSet set = eigen_samples_from_spectra(std::move(doc.summary.eigen_samples));
    doc.lambda1 = set.representative_lambda1;
    doc.index_moments = eigen_moments(set);
    doc.summary.eigen_samples.clear();
  }
  return doc;
}

Json normalized_series(const Matrix& values, long stride) {
  try {
    return decimate(min_max_normalize(flatten(values)), stride);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConstantInput) throw;
    return nullptr;
  }
}

void write_report(const std::string& path, const MomentsDocument& moments, const McDocument& mc,
                  long stride) {
  const McSummary& s = mc.summary;
  const std::pair<const char*, std::pair<const Matrix*, const Matrix*>> pairs[] = {
      {"M1_pinv", {&moments.pinv_first, &s.pinv_mean}},
      {"M2_pinv", {&moments.pinv_second_raw, &s.pinv_second_raw}},
      {"M1_A", {&moments.operator_first, &s.operator_mean}},
      {"M2_A", {&moments.operator_second, &s.operator_variance}},
  };
  Json rows = Json::array();
  for (const auto& [label, matrices] : pairs) {
    const ComparisonReport r = compare(*matrices.first, *matrices.second);
    rows.push_back({{"label", label},
                    {"rmse", r.rmse},
                    {"mae", r.mae},
                    {"frobenius", r.frobenius},
                    {"cosine", r.cosine},
                    {"rows", r.rows},
                    {"cols", r.cols}});
  }
  const Matrix delta = (s.operator_variance - moments.operator_second).cwiseAbs();
  write_file(path, [&](std::ostream& out) {
    DocumentWriter w(out);
    w.field("schema_version", kSchemaVersion);
    w.field("kind", "report");
    w.field("variance_mode", variance_mode_name(moments.variance_mode));
    w.field("mc_trials", s.trials);
    w.field("rows", rows);
    w.field("delta_sigma2_max", delta.maxCoeff());
    w.field("normalized", {{"stride", stride},
                           {"operator_variance_proposed",
                            normalized_series(moments.operator_second, stride)},
                           {"operator_variance_mc", normalized_series(s.operator_variance, stride)},
                           {"delta_sigma2", normalized_series(delta, stride)}});
    w.matrix("delta_sigma2", delta);
    w.finish();
  });
}

std::string default_bands_path(const std::string& kde_path) {
  std::filesystem::path p(kde_path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + "_bands.csv")).string();
}

struct SpectrumOptions {
  std::string moments;
  std::string mc;
  std::string config;
  std::string out;
  std::string bands_out;
  long samples = 1000;
  std::uint64_t seed = 0;
  bool clamp_negative = false;
};

void run_spectrum(const SpectrumOptions& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  const MomentsDocument moments = read_moments(o.moments);
  const OperatorInstances instances = sample_operator_instances(
      moments.operator_first, moments.operator_second, o.samples, o.seed, o.clamp_negative);
  if (instances.clamped_elements > 0) {
    err << Json({{"warning", {{"code", "ClampedNegativeVariance"},
                              {"count", instances.clamped_elements}}}})
               .dump()
        << "\n";
  }
  const EigenSampleSet proposed = eigen_samples(instances.instances);
  const auto proposed_moments = eigen_moments(proposed);

  std::optional<McDocument> mc;
  if (!o.mc.empty()) mc = read_mc(o.mc);
  if (mc && mc->index_moments.size() != proposed_moments.size()) {
    throw Error(ErrorCode::kShapeMismatch, "spectrum: mc eigenvalue count differs from moments");
  }
  if (mc && mc->lambda1.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "spectrum: mc document has no eigenvalue samples");
  }

  auto bandwidths = [&](const std::vector<Complex>& values) {
    if (config.kde.bandwidth) return std::pair{*config.kde.bandwidth, *config.kde.bandwidth};
    std::vector<double> re, im;
    for (const auto& v : values) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    return std::pair{silverman_bandwidth(re), silverman_bandwidth(im)};
  };
  const auto [hr, hi] = bandwidths(proposed.representative_lambda1);
  double hr_max = hr;
  double hi_max = hi;
  std::vector<Complex> all = proposed.representative_lambda1;
  std::pair<double, double> mc_h{0.0, 0.0};
  if (mc) {
    mc_h = bandwidths(mc->lambda1);
    hr_max = std::max(hr_max, mc_h.first);
    hi_max = std::max(hi_max, mc_h.second);
    all.insert(all.end(), mc->lambda1.begin(), mc->lambda1.end());
  }
  auto [re_lo, re_hi] = std::minmax_element(all.begin(), all.end(), [](auto a, auto b) {
    return a.real() < b.real();
  });
  auto [im_lo, im_hi] = std::minmax_element(all.begin(), all.end(), [](auto a, auto b) {
    return a.imag() < b.imag();
  });
  const auto grid_re = linear_grid(re_lo->real() - 4.0 * hr_max, re_hi->real() + 4.0 * hr_max,
                                   config.kde.grid_points);
  const auto grid_im = linear_grid(im_lo->imag() - 4.0 * hi_max, im_hi->imag() + 4.0 * hi_max,
                                   config.kde.grid_points);
  const Kde2d density = kde2d_on_grid(proposed.representative_lambda1, grid_re, grid_im, hr, hi);
  std::optional<Kde2d> mc_density;
  if (mc) mc_density = kde2d_on_grid(mc->lambda1, grid_re, grid_im, mc_h.first, mc_h.second);

  write_file(o.out, [&](std::ostream& csv) {
    csv << "grid_re,grid_im,density" << (mc ? ",density_mc" : "") << "\n";
    for (size_t i = 0; i < grid_re.size(); ++i) {
      for (size_t j = 0; j < grid_im.size(); ++j) {
        const auto ii = static_cast<Index>(i);
        const auto jj = static_cast<Index>(j);
        csv << format_double(grid_re[i]) << "," << format_double(grid_im[j]) << ","
            << format_double(density.density(ii, jj));
        if (mc) csv << "," << format_double(mc_density->density(ii, jj));
        csv << "\n";
      }
    }
  });

  long overlapping = 0;
  const std::string bands_path = o.bands_out.empty() ? default_bands_path(o.out) : o.bands_out;
  write_file(bands_path, [&](std::ostream& csv) {
    csv << "index,mean_re,mean_im,variance_re,variance_im,re_low,re_high,im_low,im_high";
    if (mc) {
      csv << ",mc_mean_re,mc_mean_im,mc_variance_re,mc_variance_im,mc_re_low,mc_re_high,"
             "mc_im_low,mc_im_high,overlap";
    }
    csv << "\n";
    auto write_stats = [&](const EigenIndexMoments& m) {
      const EigenBand b = eigen_band(m);
      csv << "," << format_double(m.mean.real()) << "," << format_double(m.mean.imag()) << ","
          << format_double(m.variance_re) << "," << format_double(m.variance_im) << ","
          << format_double(b.re_low) << "," << format_double(b.re_high) << ","
          << format_double(b.im_low) << "," << format_double(b.im_high);
    };
    for (size_t j = 0; j < proposed_moments.size(); ++j) {
      csv << j + 1;
      write_stats(proposed_moments[j]);
      if (mc) {
        write_stats(mc->index_moments[j]);
        const bool overlap =
            bands_overlap(eigen_band(proposed_moments[j]), eigen_band(mc->index_moments[j]));
        overlapping += overlap ? 1 : 0;
        csv << "," << (overlap ? 1 : 0);
      }
      csv << "\n";
    }
  });

  const auto [pi, pj] = density.peak();
  out << "spectrum: " << o.samples << " samples, lambda1 mean "
      << format_double(proposed_moments[0].mean.real()) << (proposed_moments[0].mean.imag() < 0 ? "" : "+")
      << format_double(proposed_moments[0].mean.imag()) << "i, kde peak at ("
      << format_double(grid_re[static_cast<size_t>(pi)]) << ", "
      << format_double(grid_im[static_cast<size_t>(pj)]) << ")\n";
  if (mc) {
    const auto [mi, mj] = mc_density->peak();
    out << "spectrum: mc kde peak at (" << format_double(grid_re[static_cast<size_t>(mi)]) << ", "
        << format_double(grid_im[static_cast<size_t>(mj)]) << "), peak offset "
        << std::max(std::abs(pi - mi), std::abs(pj - mj)) << " cells, bands overlapping at "
        << overlapping << " of " << proposed_moments.size() << " indices\n";
  }
  out << "spectrum: wrote " << o.out << " and " << bands_path << "\n";
}

void write_trajectory(const RawTrajectory& trajectory, const std::string& path, std::ostream& out) {
  save_csv(trajectory, path);
  out << "simulate: wrote " << trajectory.sample_count() << " samples x "
      << trajectory.state_count() << " states to " << path << "\n";
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << Json({{"error", {{"code", code}, {"message", message}}}}).dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment-based uncertainty quantification for DMD operators", "dmduq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a trajectory CSV");
  simulate->require_subcommand(1);
  SpringMassParams spring;
  std::vector<double> spring_x0{spring.x0[0], spring.x0[1]};
  std::vector<double> spring_noise{0.0, 0.0};
  std::string spring_out;
  auto* spring_cmd = simulate->add_subcommand("spring-mass", "Mass on a spring under gravity");
  spring_cmd->add_option("--mass", spring.mass, "kg")->capture_default_str();
  spring_cmd->add_option("--stiffness", spring.stiffness, "N/m")->capture_default_str();
  spring_cmd->add_option("--gravity", spring.gravity, "m/s^2")->capture_default_str();
  spring_cmd->add_option("--x0", spring_x0, "Initial displacement,velocity")
      ->delimiter(',')
      ->expected(2)
      ->allow_extra_args(false);
  spring_cmd->add_option("--duration", spring.duration, "s")->capture_default_str();
  spring_cmd->add_option("--dt", spring.dt, "s")->capture_default_str();
  spring_cmd->add_option("--noise-std", spring_noise, "Measurement noise std per state")
      ->delimiter(',')
      ->expected(2)
      ->allow_extra_args(false);
  spring_cmd->add_option("--seed", spring.seed, "Measurement noise seed");
  spring_cmd->add_option("--out", spring_out, "Output CSV")->required();

  OscillatorNetworkParams network;
  std::vector<double> network_damping;
  std::string network_out;
  auto* network_cmd = simulate->add_subcommand("network", "Seeded linear oscillator network");
  network_cmd->add_option("--nodes", network.node_count, "Node count (states = 2 x nodes)")
      ->capture_default_str();
  network_cmd->add_option("--seed", network.seed, "Topology, initial state, kick and noise seed");
  network_cmd->add_option("--duration", network.duration, "s")->capture_default_str();
  network_cmd->add_option("--dt", network.dt, "s")->capture_default_str();
  network_cmd->add_option("--damping", network_damping, "Per-node damping (one value or N)")
      ->delimiter(',');
  network_cmd->add_option("--kick-times", network.kick_times, "Velocity kick times in s")
      ->delimiter(',');
  network_cmd->add_option("--kick-amplitude", network.kick_amplitude)->capture_default_str();
  network_cmd->add_option("--noise-std", network.noise_std, "Measurement noise std")
      ->capture_default_str();
  network_cmd->add_option("--out", network_out, "Output CSV")->required();

  // moments / mc / pipeline
  DataOptions moments_opts;
  std::string moments_out;
  auto* moments_cmd = app.add_subcommand("moments", "Analytic moments of X+ and A");
  add_data_options(moments_cmd, moments_opts);
  moments_cmd->add_option("--out", moments_out, "Output moments JSON")->required();

  DataOptions mc_opts;
  std::string mc_out;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo reference moments");
  add_data_options(mc_cmd, mc_opts);
  mc_cmd->add_option("--out", mc_out, "Output MC JSON")->required();

  std::string compare_moments, compare_mc, compare_config, compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Compare analytic and MC moments");
  compare_cmd->add_option("moments", compare_moments, "moments JSON")->required();
  compare_cmd->add_option("mc", compare_mc, "MC JSON")->required();
  compare_cmd->add_option("--config", compare_config, "Pipeline config JSON");
  compare_cmd->add_option("--out", compare_out, "Output report JSON")->required();

  SpectrumOptions spectrum_opts;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Eigenvalue density of the uncertain A");
  spectrum_cmd->add_option("moments", spectrum_opts.moments, "moments JSON")->required();
  spectrum_cmd->add_option("--samples", spectrum_opts.samples, "Operator instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  spectrum_cmd->add_option("--seed", spectrum_opts.seed, "Instance seed");
  spectrum_cmd->add_option("--mc", spectrum_opts.mc, "MC JSON to compare against");
  spectrum_cmd->add_option("--config", spectrum_opts.config, "Pipeline config JSON");
  spectrum_cmd->add_flag("--clamp-negative", spectrum_opts.clamp_negative,
                         "Clamp negative variances to zero instead of failing");
  spectrum_cmd->add_option("--out", spectrum_opts.out, "Output KDE CSV")->required();
  spectrum_cmd->add_option("--bands-out", spectrum_opts.bands_out,
                           "Band table CSV (default <out>_bands.csv)");

  DataOptions pipeline_opts;
  std::string pipeline_dir;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "moments, mc and compare in one run");
  add_data_options(pipeline_cmd, pipeline_opts);
  pipeline_cmd->add_option("--out-dir", pipeline_dir, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what());
    return 2;
  }

  try {
    if (spring_cmd->parsed()) {
      spring.x0[0] = spring_x0[0];
      spring.x0[1] = spring_x0[1];
      spring.noise_std[0] = spring_noise[0];
      spring.noise_std[1] = spring_noise[1];
      write_trajectory(simulate_spring_mass(spring), spring_out, out);
    } else if (network_cmd->parsed()) {
      if (network_damping.size() == 1) {
        network.damping = Vector::Constant(network.node_count, network_damping[0]);
      } else if (!network_damping.empty()) {
        network.damping = Eigen::Map<const Vector>(network_damping.data(),
                                                   static_cast<Index>(network_damping.size()));
      }
      write_trajectory(simulate_oscillator_network(network), network_out, out);
    } else if (moments_cmd->parsed()) {
      const Inputs in = load_inputs(moments_opts);
      const MomentsDocument doc = compute_moments(in);
      write_moments(moments_out, doc);
      out << "moments: n=" << in.snapshots.n() << " m=" << in.snapshots.m() << " mode "
          << variance_mode_name(doc.variance_mode) << ", " << doc.negative_elements.size()
          << " negative variances, wrote " << moments_out << "\n";
    } else if (mc_cmd->parsed()) {
      const Inputs in = load_inputs(mc_opts);
      const McDocument doc = compute_mc(in);
      write_mc(mc_out, doc);
      out << "mc: " << doc.summary.trials << " trials (" << doc.summary.failed_trials
          << " failed), wrote " << mc_out << "\n";
    } else if (compare_cmd->parsed()) {
      const PipelineConfig config =
          compare_config.empty() ? PipelineConfig{} : load_config(compare_config);
      write_report(compare_out, read_moments(compare_moments), read_mc(compare_mc),
                   config.decimate_stride);
      out << "compare: wrote " << compare_out << "\n";
    } else if (spectrum_cmd->parsed()) {
      run_spectrum(spectrum_opts, out, err);
    } else if (pipeline_cmd->parsed()) {
      const Inputs in = load_inputs(pipeline_opts);
      std::error_code ec;
      std::filesystem::create_directories(pipeline_dir, ec);
      if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + pipeline_dir + "'");
      const std::filesystem::path dir(pipeline_dir);
      const MomentsDocument moments = compute_moments(in);
      write_moments((dir / "moments.json").string(), moments);
      const McDocument mc = compute_mc(in);
      write_mc((dir / "mc.json").string(), mc);
      write_report((dir / "report.json").string(), moments, mc, in.config.decimate_stride);
      out << "pipeline: n=" << in.snapshots.n() << " m=" << in.snapshots.m() << ", "
          << mc.summary.trials << " mc trials, wrote moments.json, mc.json, report.json to "
          << pipeline_dir << "\n";
    }
  } catch (const UsageError& e) {
    report_error(err, "UsageError", e.what());
    return 2;
  } catch (const Error& e) {
    report_error(err, e.code_name(), e.what());
    return error_exit_status(e.code());
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace dmduq::cli

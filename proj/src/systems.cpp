#include "dmduq/systems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "dmduq/error.hpp"

namespace dmduq {

namespace {

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kTopology = 1, kInitial = 2, kKicks = 3, kNoise = 4 };

long step_count(double duration, double dt) {
  return static_cast<long>(std::floor(duration / dt + 1e-9));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, message);
}

void check_time(double duration, double dt) {
  require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
  require(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
  require(step_count(duration, dt) >= 2, "duration must cover at least two steps");
}

// One classic RK4 step of x' = M x + c.
Vector rk4_step(const Matrix& m, const Vector& c, const Vector& x, double dt) {
  const Vector k1 = m * x + c;
  const Vector k2 = m * (x + 0.5 * dt * k1) + c;
  const Vector k3 = m * (x + 0.5 * dt * k2) + c;
  const Vector k4 = m * (x + dt * k3) + c;
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

RawTrajectory integrate(const Matrix& m, const Vector& c, const Vector& x0, double duration,
                        double dt, const std::vector<std::pair<long, Vector>>& kicks) {
  const long steps = step_count(duration, dt);
  RawTrajectory out;
  out.samples.resize(x0.size(), steps + 1);
  out.times.resize(static_cast<size_t>(steps + 1));
  Vector x = x0;
  size_t next_kick = 0;
  for (long i = 0; i <= steps; ++i) {
    while (next_kick < kicks.size() && kicks[next_kick].first == i) {
      x += kicks[next_kick].second;
      ++next_kick;
    }
    out.samples.col(i) = x;
    out.times[static_cast<size_t>(i)] = static_cast<double>(i) * dt;
    if (i < steps) x = rk4_step(m, c, x, dt);
  }
  return out;
}

void add_noise(RawTrajectory& trajectory, const Vector& std_dev, std::uint64_t seed) {
  if ((std_dev.array() == 0.0).all()) return;
  std::mt19937_64 rng(split_seed(seed, kNoise));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < trajectory.samples.cols(); ++j) {
    for (Index i = 0; i < trajectory.samples.rows(); ++i) {
      trajectory.samples(i, j) += std_dev(i) * normal(rng);
    }
  }
}

}  // namespace

void SpringMassParams::validate() const {
  require(std::isfinite(mass) && mass > 0.0, "mass must be > 0");
  require(std::isfinite(stiffness) && stiffness > 0.0, "stiffness must be > 0");
  require(std::isfinite(gravity), "gravity must be finite");
  require(std::isfinite(x0[0]) && std::isfinite(x0[1]), "x0 must be finite");
  require(noise_std[0] >= 0.0 && noise_std[1] >= 0.0, "noise_std must be >= 0");
  check_time(duration, dt);
}

RawTrajectory simulate_spring_mass(const SpringMassParams& params) {
  params.validate();
  Matrix m(2, 2);
  m << 0.0, 1.0, -params.stiffness / params.mass, 0.0;
  const Vector c = Eigen::Vector2d(0.0, -params.gravity);
  RawTrajectory out =
      integrate(m, c, Eigen::Vector2d(params.x0[0], params.x0[1]), params.duration, params.dt, {});
  out.state_names = {"x1", "x2"};
  add_noise(out, Eigen::Vector2d(params.noise_std[0], params.noise_std[1]), params.seed);
  return out;
}

void OscillatorNetworkParams::validate() const {
  require(node_count >= 1 && node_count <= 32, "node_count must be in [1, 32]");
  const Index n = node_count;
  if (coupling) {
    require(coupling->rows() == n && coupling->cols() == n, "coupling must be node_count square");
    require(coupling->allFinite() && (coupling->array() >= 0.0).all(),
            "coupling must be finite and nonnegative");
    require((*coupling - coupling->transpose()).cwiseAbs().maxCoeff() == 0.0,
            "coupling must be symmetric");
  }
  if (stiffness) {
    require(stiffness->size() == n && (stiffness->array() > 0.0).all(),
            "stiffness must have node_count positive entries");
  }
  if (damping.size() != 0) {
    require(damping.size() == n && (damping.array() >= 0.0).all(),
            "damping must have node_count nonnegative entries");
  }
  if (x0) require(x0->size() == 2 * n && x0->allFinite(), "x0 must have 2 * node_count entries");
  require(kick_amplitude >= 0.0 && std::isfinite(kick_amplitude), "kick_amplitude must be >= 0");
  require(noise_std >= 0.0 && std::isfinite(noise_std), "noise_std must be >= 0");
  check_time(duration, dt);
}

Matrix network_stiffness(const OscillatorNetworkParams& params) {
  params.validate();
  const Index n = params.node_count;
  std::mt19937_64 rng(split_seed(params.seed, kTopology));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix coupling = Matrix::Zero(n, n);
  if (params.coupling) {
    coupling = *params.coupling;
  } else if (n > 1) {
    for (Index i = 0; i < n; ++i) {
      const Index j = (i + 1) % n;
      if (j == i || coupling(i, j) != 0.0) continue;
      coupling(i, j) = coupling(j, i) = 0.5 + unit(rng);
    }
  }
  Vector stiffness(n);
  if (params.stiffness) {
    stiffness = *params.stiffness;
  } else {
    for (Index i = 0; i < n; ++i) stiffness(i) = 1.0 + 3.0 * unit(rng);
  }
  Matrix k = -coupling;
  k.diagonal() = stiffness + coupling.rowwise().sum();
  return k;
}

RawTrajectory simulate_oscillator_network(const OscillatorNetworkParams& params) {
  const Matrix k = network_stiffness(params);
  const Index n = params.node_count;
  const double lambda_max = Eigen::SelfAdjointEigenSolver<Matrix>(k).eigenvalues().maxCoeff();
  const double dt_limit = 0.1 / std::sqrt(lambda_max);
  if (params.dt > dt_limit) {
    throw Error(ErrorCode::kUnstableStep, "dt " + format_double(params.dt) +
                                              " exceeds stability limit " +
                                              format_double(dt_limit));
  }
  const Vector damping =
      params.damping.size() == 0 ? Vector::Constant(n, 0.05) : params.damping;

  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topRightCorner(n, n).setIdentity();
  m.bottomLeftCorner(n, n) = -k;
  m.bottomRightCorner(n, n).diagonal() = -damping;

  Vector x0 = Vector::Zero(2 * n);
  if (params.x0) {
    x0 = *params.x0;
  } else {
    std::mt19937_64 rng(split_seed(params.seed, kInitial));
    std::uniform_real_distribution<double> displacement(-0.1, 0.1);
    for (Index i = 0; i < n; ++i) x0(i) = displacement(rng);
  }

  std::vector<std::pair<long, Vector>> kicks;
  std::mt19937_64 kick_rng(split_seed(params.seed, kKicks));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> times = params.kick_times;
  std::sort(times.begin(), times.end());
  for (double t : times) {
    Vector direction(n);
    for (Index i = 0; i < n; ++i) direction(i) = normal(kick_rng);
    Vector kick = Vector::Zero(2 * n);
    kick.tail(n) = params.kick_amplitude * direction / direction.norm();
    kicks.emplace_back(std::lround(t / params.dt), kick);
  }

  RawTrajectory out = integrate(m, Vector::Zero(2 * n), x0, params.duration, params.dt, kicks);
  for (Index i = 0; i < n; ++i) out.state_names.push_back("q" + std::to_string(i + 1));
  for (Index i = 0; i < n; ++i) out.state_names.push_back("v" + std::to_string(i + 1));
  add_noise(out, Vector::Constant(2 * n, params.noise_std), params.seed);
  return out;
}

}  // namespace dmduq

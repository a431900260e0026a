#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dmduq/data_model.hpp"

namespace dmduq {

// x1' = x2, x2' = -(k/m) x1 - g, integrated with classic RK4.
struct SpringMassParams {
  double mass = 5.0;        // kg
  double stiffness = 20.0;  // N/m
  double gravity = 9.81;    // m/s^2
  double x0[2] = {0.03, 0.01};
  double duration = 40.0;  // s
  double dt = 0.01;        // s
  // Optional additive Gaussian measurement noise (standard deviation per state).
  double noise_std[2] = {0.0, 0.0};
  std::uint64_t seed = 0;

  void validate() const;
};

RawTrajectory simulate_spring_mass(const SpringMassParams& params);

// Linear network q'' = -K q - D q' with K = diag(stiffness) + L(coupling),
// L the graph Laplacian. States are ordered q1..qN, v1..vN.
// Empty optional fields are drawn from `seed`: a weighted ring coupling,
// stiffness in [1, 4], initial displacements in [-0.1, 0.1].
struct OscillatorNetworkParams {
  int node_count = 17;
  std::optional<Matrix> coupling;   // symmetric, nonnegative, zero diagonal
  std::optional<Vector> stiffness;  // per node, > 0
  Vector damping;                   // per node, >= 0; empty means 0.05 everywhere
  std::optional<Vector> x0;         // length 2 * node_count
  std::uint64_t seed = 0;
  double duration = 120.0;
  double dt = 0.01;
  // Velocity kicks of the given amplitude in seeded random directions.
  std::vector<double> kick_times;
  double kick_amplitude = 0.1;
  double noise_std = 0.0;  // additive measurement noise, all states

  void validate() const;
};

// Resolved K matrix (stiffness plus Laplacian) for the given parameters.
Matrix network_stiffness(const OscillatorNetworkParams& params);

// Raises UnstableStep when dt > 0.1 / sqrt(max eigenvalue of K).
RawTrajectory simulate_oscillator_network(const OscillatorNetworkParams& params);

}  // namespace dmduq

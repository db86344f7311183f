#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardioforge/dynamical_model.hpp"

namespace cardioforge {

struct EtaDistribution;

/// Residual of the z-ODE evaluated on a candidate heartbeat, with the x/y
/// trajectories fixed to their ODE solutions from (-0.41, -0.91).
struct SimDistanceResult {
    double value = 0.0;            // sum of squared discrete residuals
    std::vector<double> grad;      // d value / d h[l], length L
    std::vector<double> x_traj;    // fixed x solution, length L
    std::vector<double> y_traj;    // fixed y solution, length L
};

/// Sum over the L-1 consecutive sample pairs of
///   ((h[l+1] - h[l]) / dt - f_z(x[l], y[l], h[l], t[l]))^2.
/// The gradient is analytic: each term reaches h[l] through the difference
/// quotient and through df_z/dz = -1, and h[l+1] through the quotient alone.
/// Throws std::invalid_argument when h.size() != eta.L.
SimDistanceResult sim_distance(std::span<const double> h, const SimulatorParams& eta);

struct EulerLossResult {
    double value = 0.0;
    /// Per-batch-element gradients, each of length L, already averaged over
    /// the batch and the eta draws.
    std::vector<std::vector<double>> grads;
};

/// Monte-Carlo Euler loss: mean of sim_distance over the batch and over
/// n_eta_samples eta draws per element. Summation order is fixed, so the
/// result is reproducible for a given seed.
EulerLossResult euler_loss(const std::vector<std::vector<double>>& batch,
                           const EtaDistribution& dist, int n_eta_samples,
                           std::uint64_t rng_seed);

}  // namespace cardioforge

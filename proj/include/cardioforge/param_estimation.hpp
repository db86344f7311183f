#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cardioforge/beat_data.hpp"
#include "cardioforge/dynamical_model.hpp"

namespace cardioforge {

class Rng;

inline constexpr int kEtaDim = 15;

/// Component order matches the free parameter vector:
/// theta_P..theta_T, a_P..a_T, b_P..b_T.
extern const std::array<const char*, kEtaDim> kEtaComponentNames;

std::array<double, kEtaDim> eta_pack(const SimulatorParams& p);
/// Rebuild params from a 15-vector on top of the given globals
/// (omega, A, f2, fs, dt, L are not part of the vector).
SimulatorParams eta_unpack(const std::array<double, kEtaDim>& eta,
                           const SimulatorParams& globals);

/// Width floor applied when repairing sampled or searched parameters.
inline constexpr double kBMin = 0.01;

/// Clamp b at kBMin and sort theta ascending if a draw violates ordering.
std::array<double, kEtaDim> repair_eta(std::array<double, kEtaDim> eta);

struct FitResult {
    SimulatorParams eta;
    double residual = 0.0;  // mean squared distance to the target beat
    int iterations = 0;     // objective evaluations spent
    bool converged = false;
};

/// Diagonal Gaussian over the 15 free parameters for one beat class.
struct EtaDistribution {
    BeatLabel class_label = BeatLabel::kN;
    std::array<double, kEtaDim> mean{};
    std::array<double, kEtaDim> var{};
    std::int64_t count = 0;

    /// Point distribution (variance zero) centred on the given parameters.
    static EtaDistribution point(const SimulatorParams& p, BeatLabel label);

    /// Flat text persistence: "class,component_name,mean,var" rows.
    void save(const std::string& path) const;
    static EtaDistribution load(const std::string& path);
};

/// Fit the free parameters to one beat by Nelder-Mead on the mean squared
/// distance between integrate(eta).z and the beat. Three chained restarts
/// (first from init, then from best-so-far with ±5% jitter), `budget`
/// objective evaluations each. The returned parameters are repaired to
/// satisfy the type invariants and never score worse than init.
FitResult fit_eta(const Heartbeat& beat, const SimulatorParams& init, int budget);

/// Sample mean and population variance per component.
EtaDistribution build_distribution(const std::vector<FitResult>& fits, BeatLabel label);

SimulatorParams sample_eta(const EtaDistribution& dist, Rng& rng);
SimulatorParams sample_eta(const EtaDistribution& dist, std::uint64_t rng_seed);

/// Simulator-only generation: sample eta, add zero-mean Gaussian noise with
/// per-component sigma noise_sigma*|mean[i]|, integrate, label. Divergent
/// draws are resampled; more than 10*n failures is an error.
std::vector<Heartbeat> simulator_only_generate(const EtaDistribution& dist, int n,
                                               double noise_sigma, std::uint64_t rng_seed);

/// CSV export of a fit batch: residual/iterations/converged plus components.
void save_fit_results_csv(const std::vector<FitResult>& fits, const std::string& path);

}  // namespace cardioforge

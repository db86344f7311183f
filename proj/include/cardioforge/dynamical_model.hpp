#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cardioforge {

/// Wave events, in trajectory order around the limit cycle.
enum class Wave { kP = 0, kQ = 1, kR = 2, kS = 3, kT = 4 };
inline constexpr int kNumWaves = 5;

/// Parameters of the heart dynamical model: the 15 free wave parameters
/// (theta/a/b per event) plus the global constants that are never fitted
/// or sampled (omega, A, f2, fs, dt, L).
struct SimulatorParams {
    std::array<double, kNumWaves> theta;  // event angles, radians, ascending in [-pi, pi)
    std::array<double, kNumWaves> a;      // event magnitudes
    std::array<double, kNumWaves> b;      // event angular widths, radians, > 0
    double omega;                         // angular velocity, rad/s
    double A;                             // baseline-wander amplitude, mV
    double f2;                            // respiratory frequency, Hz
    double fs;                            // sampling frequency, Hz
    double dt;                            // seconds, = 1/fs
    std::int64_t L;                       // samples per beat

    /// Normal-beat defaults (parameter set version 1): 216 samples at 360 Hz,
    /// one revolution per window.
    static SimulatorParams defaults();

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Version tag for the built-in default parameter set.
inline constexpr int kDefaultParamSetVersion = 1;

struct State {
    double x;  // dimensionless
    double y;  // dimensionless
    double z;  // mV
    double t;  // seconds
};

/// Conventional trajectory start on the limit cycle: (-0.41, -0.91, 0, 0).
State default_init();

/// Discrete solution of the model ODEs. states[l].t == l*dt exactly and
/// euler_step(states[l]) == states[l+1] bit for bit.
struct Trajectory {
    std::vector<State> states;
    SimulatorParams params;

    std::vector<double> z() const;
    /// CSV export, header "t,x,y,z", 17 significant digits per value.
    void save_csv(const std::string& path) const;
};

/// alpha(x, y) = 1 - sqrt(x^2 + y^2); radial restoring factor.
double alpha(double x, double y);

/// atan2 phase of (x, y) in [-pi, pi]. Throws std::domain_error at the origin.
double theta_of(double x, double y);

/// Wrap an angle to [-pi, pi).
double wrap_angle(double r);

/// Signed wrapped phase distance theta(x,y) - theta_beta in [-pi, pi).
double delta_theta(double x, double y, double theta_beta);

/// Baseline wander z0(t) = A sin(2 pi f2 t).
double baseline(double t, double A, double f2);

double f_x(double x, double y, const SimulatorParams& params);
double f_y(double x, double y, const SimulatorParams& params);

/// z-derivative: the five event terms plus mean reversion toward z0(t).
/// Events with a_beta == 0 contribute nothing and do not evaluate the phase,
/// so the origin is only a domain error when some a_beta != 0.
double f_z(double x, double y, double z, double t, const SimulatorParams& params);

/// One explicit-Euler update u' = u + v*dt.
double euler_update(double u, double v, double dt);

/// One explicit Euler step; all derivatives evaluated at the input state.
/// Time advances on the sample grid: t' = (round(t/dt) + 1) * dt, so that
/// re-stepping a stored trajectory state reproduces the next state exactly.
/// Throws DivergenceError if the result is non-finite.
State euler_step(const State& state, const SimulatorParams& params);

/// L-state explicit-Euler trajectory from init; states[0] == init.
/// Throws DivergenceError (with step index) if any step goes non-finite.
Trajectory integrate(const SimulatorParams& params, const State& init);

/// Classical 4th-order Runge-Kutta companion. Cross-check mode only; the
/// Euler solution is the normative one and the only one the residual loss
/// ever sees.
Trajectory integrate_rk4(const SimulatorParams& params, const State& init);

}  // namespace cardioforge

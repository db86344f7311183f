#include "cardioforge/dynamical_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "cardioforge/errors.hpp"

namespace cardioforge {

namespace {
constexpr double kPi = std::numbers::pi;

bool finite(const State& s) {
    return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.z) &&
           std::isfinite(s.t);
}
}  // namespace

SimulatorParams SimulatorParams::defaults() {
    SimulatorParams p;
    p.theta = {-kPi / 3.0, -kPi / 12.0, 0.0, kPi / 12.0, kPi / 2.0};
    p.a = {1.2, -5.0, 30.0, -7.5, 0.75};
    p.b = {0.25, 0.1, 0.1, 0.1, 0.4};
    p.fs = 360.0;
    p.dt = 1.0 / 360.0;
    p.L = 216;
    // One revolution spans exactly one window: omega = 2*pi / (L*dt).
    p.omega = 2.0 * kPi / (static_cast<double>(p.L) * p.dt);
    p.A = 0.15;
    p.f2 = 0.25;
    return p;
}

void SimulatorParams::validate() const {
    for (int i = 0; i < kNumWaves; ++i) {
        if (!(theta[i] >= -kPi && theta[i] < kPi)) {
            throw std::invalid_argument("theta component out of [-pi, pi)");
        }
        if (!(b[i] > 0.0)) throw std::invalid_argument("b component must be > 0");
        if (!std::isfinite(a[i])) throw std::invalid_argument("a component not finite");
    }
    for (int i = 1; i < kNumWaves; ++i) {
        if (!(theta[i - 1] < theta[i])) {
            throw std::invalid_argument("theta components must be strictly ascending");
        }
    }
    if (!(L >= 2)) throw std::invalid_argument("L must be >= 2");
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
    if (!(f2 > 0.0)) throw std::invalid_argument("f2 must be > 0");
    if (!(A >= 0.0)) throw std::invalid_argument("A must be >= 0");
    if (!(fs > 0.0) || !(dt > 0.0) || dt * fs != 1.0) {
        throw std::invalid_argument("dt * fs must equal 1 exactly");
    }
}

State default_init() { return State{-0.41, -0.91, 0.0, 0.0}; }

std::vector<double> Trajectory::z() const {
    std::vector<double> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = states[i].z;
    return out;
}

void Trajectory::save_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open trajectory output file: " + path);
    f << "t,x,y,z\n";
    char buf[128];
    for (const State& s : states) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", s.t, s.x, s.y, s.z);
        f << buf;
    }
    if (!f) throw InputError("failed writing trajectory file: " + path);
}

double alpha(double x, double y) { return 1.0 - std::sqrt(x * x + y * y); }

double theta_of(double x, double y) {
    if (x == 0.0 && y == 0.0) {
        throw std::domain_error("phase undefined at the origin");
    }
    return std::atan2(y, x);
}

double wrap_angle(double r) {
    return r - 2.0 * kPi * std::floor((r + kPi) / (2.0 * kPi));
}

double delta_theta(double x, double y, double theta_beta) {
    return wrap_angle(theta_of(x, y) - theta_beta);
}

double baseline(double t, double A, double f2) {
    return A * std::sin(2.0 * kPi * f2 * t);
}

double f_x(double x, double y, const SimulatorParams& params) {
    return alpha(x, y) * x - params.omega * y;
}

double f_y(double x, double y, const SimulatorParams& params) {
    return alpha(x, y) * y + params.omega * x;
}

double f_z(double x, double y, double z, double t, const SimulatorParams& params) {
    double events = 0.0;
    for (int i = 0; i < kNumWaves; ++i) {
        if (params.a[i] == 0.0) continue;
        const double d = delta_theta(x, y, params.theta[i]);
        events -= params.a[i] * d * std::exp(-d * d / (2.0 * params.b[i] * params.b[i]));
    }
    return events - (z - baseline(t, params.A, params.f2));
}

double euler_update(double u, double v, double dt) { return u + v * dt; }

State euler_step(const State& state, const SimulatorParams& params) {
    const double dt = params.dt;
    State next;
    next.x = euler_update(state.x, f_x(state.x, state.y, params), dt);
    next.y = euler_update(state.y, f_y(state.x, state.y, params), dt);
    next.z = euler_update(state.z, f_z(state.x, state.y, state.z, state.t, params), dt);
    // Advance on the sample grid so that t stays exactly l*dt.
    const auto step_index = static_cast<std::int64_t>(std::llround(state.t / dt));
    next.t = static_cast<double>(step_index + 1) * dt;
    if (!finite(next)) {
        throw DivergenceError("integration diverged", static_cast<std::size_t>(step_index));
    }
    return next;
}

Trajectory integrate(const SimulatorParams& params, const State& init) {
    params.validate();
    if (!finite(init)) throw std::invalid_argument("initial state not finite");
    Trajectory traj;
    traj.params = params;
    traj.states.reserve(static_cast<std::size_t>(params.L));
    traj.states.push_back(init);
    for (std::int64_t l = 0; l + 1 < params.L; ++l) {
        try {
            traj.states.push_back(euler_step(traj.states.back(), params));
        } catch (const DivergenceError&) {
            throw DivergenceError("integration diverged at step " + std::to_string(l),
                                  static_cast<std::size_t>(l));
        }
    }
    return traj;
}

namespace {

struct Deriv {
    double dx, dy, dz;
};

Deriv derivs(double x, double y, double z, double t, const SimulatorParams& p) {
    return {f_x(x, y, p), f_y(x, y, p), f_z(x, y, z, t, p)};
}

}  // namespace

Trajectory integrate_rk4(const SimulatorParams& params, const State& init) {
    params.validate();
    if (!finite(init)) throw std::invalid_argument("initial state not finite");
    Trajectory traj;
    traj.params = params;
    traj.states.reserve(static_cast<std::size_t>(params.L));
    traj.states.push_back(init);
    const double dt = params.dt;
    for (std::int64_t l = 0; l + 1 < params.L; ++l) {
        const State& s = traj.states.back();
        const Deriv k1 = derivs(s.x, s.y, s.z, s.t, params);
        const Deriv k2 = derivs(s.x + 0.5 * dt * k1.dx, s.y + 0.5 * dt * k1.dy,
                                s.z + 0.5 * dt * k1.dz, s.t + 0.5 * dt, params);
        const Deriv k3 = derivs(s.x + 0.5 * dt * k2.dx, s.y + 0.5 * dt * k2.dy,
                                s.z + 0.5 * dt * k2.dz, s.t + 0.5 * dt, params);
        const Deriv k4 = derivs(s.x + dt * k3.dx, s.y + dt * k3.dy, s.z + dt * k3.dz,
                                s.t + dt, params);
        State n;
        n.x = s.x + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
        n.y = s.y + dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
        n.z = s.z + dt / 6.0 * (k1.dz + 2.0 * k2.dz + 2.0 * k3.dz + k4.dz);
        n.t = static_cast<double>(l + 1) * dt;
        if (!finite(n)) {
            throw DivergenceError("rk4 integration diverged at step " + std::to_string(l),
                                  static_cast<std::size_t>(l));
        }
        traj.states.push_back(n);
    }
    return traj;
}

}  // namespace cardioforge

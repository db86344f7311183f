#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "cardioforge/dynamical_model.hpp"
#include "cardioforge/euler_loss.hpp"
#include "cardioforge/param_estimation.hpp"
#include "cardioforge/rng.hpp"

using namespace cardioforge;

namespace {

// Straightforward double-loop re-evaluation of the residual sum, independent
// of the implementation path (its own x/y integration and wrap arithmetic).
double oracle_sim_distance(const std::vector<double>& h, const SimulatorParams& p) {
    const auto L = static_cast<std::size_t>(p.L);
    std::vector<double> xs(L), ys(L);
    double x = -0.41, y = -0.91;
    for (std::size_t l = 0; l < L; ++l) {
        xs[l] = x;
        ys[l] = y;
        const double al = 1.0 - std::sqrt(x * x + y * y);
        const double nx = x + (al * x - p.omega * y) * p.dt;
        const double ny = y + (al * y + p.omega * x) * p.dt;
        x = nx;
        y = ny;
    }
    double acc = 0.0;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const double t = static_cast<double>(l) * p.dt;
        double events = 0.0;
        const double th = std::atan2(ys[l], xs[l]);
        for (int i = 0; i < kNumWaves; ++i) {
            double d = th - p.theta[i];
            d -= 2.0 * std::numbers::pi *
                 std::floor((d + std::numbers::pi) / (2.0 * std::numbers::pi));
            events -= p.a[i] * d * std::exp(-d * d / (2.0 * p.b[i] * p.b[i]));
        }
        const double z0 = p.A * std::sin(2.0 * std::numbers::pi * p.f2 * t);
        const double fz = events - (h[l] - z0);
        const double r = (h[l + 1] - h[l]) / p.dt - fz;
        acc += r * r;
    }
    return acc;
}

SimulatorParams perturbed_defaults(Rng& rng, double rel) {
    SimulatorParams p = SimulatorParams::defaults();
    auto v = eta_pack(p);
    for (int i = 0; i < kEtaDim; ++i) {
        const double base = v[i] != 0.0 ? v[i] : 0.02;
        v[i] += base * rng.uniform(-rel, rel);
    }
    return eta_unpack(repair_eta(v), p);
}

}  // namespace

TEST_CASE("zero-residual identity on the simulator's own output") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const SimulatorParams eta = perturbed_defaults(rng, 0.3);
        const auto z = integrate(eta, default_init()).z();
        const SimDistanceResult r = sim_distance(z, eta);
        CHECK(r.value >= 0.0);
        CHECK(r.value < 1e-9);
    }
}

TEST_CASE("perturbing one sample makes the distance strictly positive") {
    const SimulatorParams eta = SimulatorParams::defaults();
    auto z = integrate(eta, default_init()).z();
    z[100] += 0.1;
    CHECK(sim_distance(z, eta).value > 0.0);
}

TEST_CASE("all-zero heartbeat matches the independent double-loop oracle") {
    const SimulatorParams eta = SimulatorParams::defaults();
    const std::vector<double> h(216, 0.0);
    const SimDistanceResult r = sim_distance(h, eta);
    CHECK(r.value == doctest::Approx(oracle_sim_distance(h, eta)).epsilon(1e-12));
}

TEST_CASE("random heartbeats match the oracle") {
    Rng rng(22);
    for (int trial = 0; trial < 5; ++trial) {
        const SimulatorParams eta = perturbed_defaults(rng, 0.2);
        std::vector<double> h(216);
        for (double& v : h) v = rng.uniform(-1.5, 1.5);
        const SimDistanceResult r = sim_distance(h, eta);
        CHECK(r.value == doctest::Approx(oracle_sim_distance(h, eta)).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradient agrees with central finite differences") {
    Rng rng(23);
    const SimulatorParams eta = perturbed_defaults(rng, 0.1);
    std::vector<double> h(216);
    for (double& v : h) v = rng.uniform(-1.0, 1.0);
    const SimDistanceResult r = sim_distance(h, eta);
    const double step = 1e-5;
    // spot-check a spread of components; the acceptance suite sweeps all L
    for (std::size_t l : {std::size_t{0}, std::size_t{1}, std::size_t{71},
                          std::size_t{107}, std::size_t{214}, std::size_t{215}}) {
        std::vector<double> hp = h, hm = h;
        hp[l] += step;
        hm[l] -= step;
        const double fd =
            (sim_distance(hp, eta).value - sim_distance(hm, eta).value) / (2 * step);
        const double denom = std::max({std::abs(fd), std::abs(r.grad[l]), 1e-6});
        CHECK(std::abs(fd - r.grad[l]) / denom < 1e-5);
    }
}

TEST_CASE("x/y trajectories are independent of the heartbeat input") {
    Rng rng(24);
    const SimulatorParams eta = SimulatorParams::defaults();
    std::vector<double> h(216);
    for (double& v : h) v = rng.uniform(-1.0, 1.0);
    const SimDistanceResult r1 = sim_distance(h, eta);
    h[50] += 3.0;
    const SimDistanceResult r2 = sim_distance(h, eta);
    for (std::size_t l = 0; l < r1.x_traj.size(); ++l) {
        CHECK(r1.x_traj[l] == r2.x_traj[l]);
        CHECK(r1.y_traj[l] == r2.y_traj[l]);
    }
}

TEST_CASE("length mismatch is an error") {
    const SimulatorParams eta = SimulatorParams::defaults();
    const std::vector<double> h(100, 0.0);
    CHECK_THROWS_AS(sim_distance(h, eta), std::invalid_argument);
}

TEST_CASE("euler_loss: degenerate expectation and batch decomposition") {
    const SimulatorParams p = SimulatorParams::defaults();
    const EtaDistribution point = EtaDistribution::point(p, BeatLabel::kN);

    SUBCASE("one simulator-exact beat and a variance-free distribution give 0") {
        const auto z = integrate(p, default_init()).z();
        const EulerLossResult r = euler_loss({z}, point, 1, 7);
        CHECK(r.value < 1e-9);
    }

    SUBCASE("n_eta_samples = 1 equals sim_distance at the sampled eta") {
        Rng rng(25);
        std::vector<double> h(216);
        for (double& v : h) v = rng.uniform(-1.0, 1.0);
        const EulerLossResult r = euler_loss({h}, point, 1, 99);
        const SimDistanceResult s = sim_distance(h, sample_eta(point, std::uint64_t{99}));
        CHECK(r.value == doctest::Approx(s.value).epsilon(1e-12));
    }

    SUBCASE("4 x 8 Monte-Carlo estimate is the arithmetic mean of the 32 terms") {
        Rng rng(26);
        EtaDistribution dist = point;
        for (int i = 0; i < kEtaDim; ++i) {
            dist.var[i] = 1e-4 * dist.mean[i] * dist.mean[i];
        }
        std::vector<std::vector<double>> batch(4, std::vector<double>(216));
        for (auto& h : batch) {
            for (double& v : h) v = rng.uniform(-1.0, 1.0);
        }
        const std::uint64_t seed = 1234;
        const EulerLossResult r = euler_loss(batch, dist, 8, seed);
        // replay the identical draw stream and average the individual terms
        Rng replay(seed);
        double acc = 0.0;
        for (const auto& h : batch) {
            for (int s = 0; s < 8; ++s) {
                acc += sim_distance(h, sample_eta(dist, replay)).value;
            }
        }
        CHECK(r.value == doctest::Approx(acc / 32.0).epsilon(1e-12));
    }
}

TEST_CASE("non-negativity over random inputs") {
    Rng rng(27);
    for (int trial = 0; trial < 20; ++trial) {
        const SimulatorParams eta = perturbed_defaults(rng, 0.25);
        std::vector<double> h(216);
        for (double& v : h) v = rng.uniform(-2.0, 2.0);
        CHECK(sim_distance(h, eta).value >= 0.0);
    }
}

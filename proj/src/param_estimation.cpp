#include "cardioforge/param_estimation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cardioforge/errors.hpp"
#include "cardioforge/rng.hpp"

namespace cardioforge {

const std::array<const char*, kEtaDim> kEtaComponentNames = {
    "theta_P", "theta_Q", "theta_R", "theta_S", "theta_T",
    "a_P",     "a_Q",     "a_R",     "a_S",     "a_T",
    "b_P",     "b_Q",     "b_R",     "b_S",     "b_T",
};

std::array<double, kEtaDim> eta_pack(const SimulatorParams& p) {
    std::array<double, kEtaDim> v;
    for (int i = 0; i < kNumWaves; ++i) {
        v[i] = p.theta[i];
        v[kNumWaves + i] = p.a[i];
        v[2 * kNumWaves + i] = p.b[i];
    }
    return v;
}

SimulatorParams eta_unpack(const std::array<double, kEtaDim>& eta,
                           const SimulatorParams& globals) {
    SimulatorParams p = globals;
    for (int i = 0; i < kNumWaves; ++i) {
        p.theta[i] = eta[i];
        p.a[i] = eta[kNumWaves + i];
        p.b[i] = eta[2 * kNumWaves + i];
    }
    return p;
}

std::array<double, kEtaDim> repair_eta(std::array<double, kEtaDim> eta) {
    for (int i = 0; i < kNumWaves; ++i) eta[i] = wrap_angle(eta[i]);
    if (!std::is_sorted(eta.begin(), eta.begin() + kNumWaves)) {
        std::sort(eta.begin(), eta.begin() + kNumWaves);
    }
    for (int i = 2 * kNumWaves; i < kEtaDim; ++i) eta[i] = std::max(eta[i], kBMin);
    return eta;
}

EtaDistribution EtaDistribution::point(const SimulatorParams& p, BeatLabel label) {
    EtaDistribution d;
    d.class_label = label;
    d.mean = eta_pack(p);
    d.var.fill(0.0);
    d.count = 1;
    return d;
}

void EtaDistribution::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open eta distribution file for writing: " + path);
    char buf[160];
    for (int i = 0; i < kEtaDim; ++i) {
        std::snprintf(buf, sizeof(buf), "%c,%s,%.17g,%.17g\n", label_to_char(class_label),
                      kEtaComponentNames[i], mean[i], var[i]);
        f << buf;
    }
    if (!f) throw InputError("failed writing eta distribution file: " + path);
}

EtaDistribution EtaDistribution::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open eta distribution file: " + path);
    EtaDistribution d;
    d.count = 1;  // the flat schema does not carry the fit count
    std::array<bool, kEtaDim> seen{};
    std::string line;
    int line_no = 0;
    bool have_class = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cls, comp, mean_s, var_s;
        if (!std::getline(ss, cls, ',') || !std::getline(ss, comp, ',') ||
            !std::getline(ss, mean_s, ',') || !std::getline(ss, var_s)) {
            throw InputError("malformed eta distribution row at line " +
                             std::to_string(line_no) + " in " + path);
        }
        if (cls.size() != 1) {
            throw InputError("bad class field at line " + std::to_string(line_no) + " in " +
                             path);
        }
        const BeatLabel label = label_from_char(cls[0]);
        if (have_class && label != d.class_label) {
            throw InputError("mixed classes in eta distribution file " + path);
        }
        d.class_label = label;
        have_class = true;
        int idx = -1;
        for (int i = 0; i < kEtaDim; ++i) {
            if (comp == kEtaComponentNames[i]) {
                idx = i;
                break;
            }
        }
        if (idx < 0) {
            throw InputError("unknown component '" + comp + "' at line " +
                             std::to_string(line_no) + " in " + path);
        }
        try {
            d.mean[idx] = std::stod(mean_s);
            d.var[idx] = std::stod(var_s);
        } catch (const std::exception&) {
            throw InputError("bad numeric field at line " + std::to_string(line_no) +
                             " in " + path);
        }
        if (d.var[idx] < 0.0) {
            throw InputError("negative variance at line " + std::to_string(line_no) +
                             " in " + path);
        }
        seen[idx] = true;
    }
    for (int i = 0; i < kEtaDim; ++i) {
        if (!seen[i]) {
            throw InputError(std::string("eta distribution file missing component ") +
                             kEtaComponentNames[i] + ": " + path);
        }
    }
    return d;
}

namespace {

// Objective evaluation for the search: wrap angles and clamp widths so the
// candidate is always integrable, then mean squared distance to the beat.
class FitObjective {
  public:
    FitObjective(const std::vector<double>& beat, const SimulatorParams& globals)
        : beat_(beat), globals_(globals) {}

    double operator()(const std::array<double, kEtaDim>& v) const {
        SimulatorParams p = globals_;
        for (int i = 0; i < kNumWaves; ++i) {
            p.theta[i] = wrap_angle(v[i]);
            p.a[i] = v[kNumWaves + i];
            p.b[i] = std::max(v[2 * kNumWaves + i], kBMin);
        }
        State s = default_init();
        double acc = 0.0;
        const auto L = static_cast<std::size_t>(globals_.L);
        for (std::size_t l = 0; l < L; ++l) {
            const double d = s.z - beat_[l];
            acc += d * d;
            if (l + 1 < L) {
                try {
                    s = euler_step(s, p);
                } catch (const DivergenceError&) {
                    throw FitDivergedError("objective diverged during eta search");
                }
            }
        }
        const double f = acc / static_cast<double>(L);
        if (!std::isfinite(f)) {
            throw FitDivergedError("non-finite objective during eta search");
        }
        return f;
    }

  private:
    const std::vector<double>& beat_;
    SimulatorParams globals_;
};

struct NmResult {
    std::array<double, kEtaDim> x;
    double f;
    int evals;
    bool converged;
};

// Nelder-Mead with the usual dimension-adaptive coefficients.
NmResult nelder_mead(const FitObjective& obj, const std::array<double, kEtaDim>& start,
                     int budget) {
    constexpr int n = kEtaDim;
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / n;
    const double gamma = 0.75 - 0.5 / n;
    const double delta = 1.0 - 1.0 / n;
    constexpr double kXTol = 1e-12;
    constexpr double kFTol = 1e-16;

    using Point = std::array<double, kEtaDim>;
    std::vector<Point> xs(n + 1, start);
    std::vector<double> fs(n + 1);
    int evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        return obj(p);
    };

    fs[0] = eval(xs[0]);
    for (int i = 0; i < n; ++i) {
        Point p = start;
        p[i] += p[i] != 0.0 ? 0.05 * std::abs(p[i]) : 0.00025;
        xs[i + 1] = p;
        fs[i + 1] = eval(p);
    }

    std::vector<int> order(n + 1);
    bool converged = false;
    while (evals < budget) {
        for (int i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int u, int v) { return fs[u] < fs[v]; });
        const int best = order[0];
        const int worst = order[n];
        const int second_worst = order[n - 1];

        double fspread = fs[worst] - fs[best];
        double xspread = 0.0;
        for (int i = 0; i < n; ++i) {
            xspread = std::max(xspread, std::abs(xs[worst][i] - xs[best][i]));
        }
        if (fspread < kFTol && xspread < kXTol) {
            converged = true;
            break;
        }

        Point centroid{};
        for (int i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (int d = 0; d < n; ++d) centroid[d] += xs[i][d];
        }
        for (int d = 0; d < n; ++d) centroid[d] /= n;

        Point xr;
        for (int d = 0; d < n; ++d) xr[d] = centroid[d] + alpha * (centroid[d] - xs[worst][d]);
        const double fr = eval(xr);

        if (fr < fs[best]) {
            Point xe;
            for (int d = 0; d < n; ++d) xe[d] = centroid[d] + beta * (xr[d] - centroid[d]);
            const double fe = eval(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second_worst]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            bool shrink = false;
            if (fr < fs[worst]) {
                Point xc;
                for (int d = 0; d < n; ++d) {
                    xc[d] = centroid[d] + gamma * (xr[d] - centroid[d]);
                }
                const double fc = eval(xc);
                if (fc <= fr) {
                    xs[worst] = xc;
                    fs[worst] = fc;
                } else {
                    shrink = true;
                }
            } else {
                Point xc;
                for (int d = 0; d < n; ++d) {
                    xc[d] = centroid[d] - gamma * (centroid[d] - xs[worst][d]);
                }
                const double fc = eval(xc);
                if (fc < fs[worst]) {
                    xs[worst] = xc;
                    fs[worst] = fc;
                } else {
                    shrink = true;
                }
            }
            if (shrink) {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (int d = 0; d < n; ++d) {
                        xs[i][d] = xs[best][d] + delta * (xs[i][d] - xs[best][d]);
                    }
                    fs[i] = eval(xs[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i <= n; ++i) {
        if (fs[i] < fs[best]) best = i;
    }
    return {xs[best], fs[best], evals, converged};
}

}  // namespace

FitResult fit_eta(const Heartbeat& beat, const SimulatorParams& init, int budget) {
    init.validate();
    if (static_cast<std::int64_t>(beat.samples.size()) != init.L) {
        throw std::invalid_argument("beat length does not match init.L");
    }
    if (budget < 1) throw std::invalid_argument("fit budget must be >= 1");

    const FitObjective obj(beat.samples, init);
    const std::array<double, kEtaDim> x0 = eta_pack(init);
    const double f_init = obj(x0);
    int evals = 1;

    FitResult out;
    if (f_init <= 1e-18) {
        out.eta = init;
        out.residual = f_init;
        out.iterations = evals;
        out.converged = true;
        return out;
    }

    // Restarts are deterministic: the jitter stream is fixed, not seeded by
    // the caller.
    Rng jitter(0x0f17e7a5eedull);
    std::array<double, kEtaDim> best_x = x0;
    double best_f = f_init;
    bool converged = false;
    for (int restart = 0; restart < 3; ++restart) {
        std::array<double, kEtaDim> start = best_x;
        if (restart > 0) {
            for (int i = 0; i < kEtaDim; ++i) {
                const double base = start[i] != 0.0 ? start[i] : 0.005;
                start[i] += base * jitter.uniform(-0.05, 0.05);
            }
        }
        const NmResult r = nelder_mead(obj, start, budget);
        evals += r.evals;
        if (r.f < best_f) {
            best_f = r.f;
            best_x = r.x;
        }
        converged = converged || r.converged;
    }

    const std::array<double, kEtaDim> repaired = repair_eta(best_x);
    const double f_rep = obj(repaired);
    ++evals;
    if (f_rep > f_init) {
        out.eta = init;
        out.residual = f_init;
        out.converged = false;
    } else {
        out.eta = eta_unpack(repaired, init);
        out.residual = f_rep;
        out.converged = converged;
    }
    out.iterations = evals;
    return out;
}

EtaDistribution build_distribution(const std::vector<FitResult>& fits, BeatLabel label) {
    if (fits.empty()) throw std::invalid_argument("build_distribution: no fits");
    EtaDistribution d;
    d.class_label = label;
    d.count = static_cast<std::int64_t>(fits.size());
    const double n = static_cast<double>(fits.size());
    d.mean.fill(0.0);
    d.var.fill(0.0);
    for (const FitResult& f : fits) {
        const auto v = eta_pack(f.eta);
        for (int i = 0; i < kEtaDim; ++i) d.mean[i] += v[i];
    }
    for (int i = 0; i < kEtaDim; ++i) d.mean[i] /= n;
    for (const FitResult& f : fits) {
        const auto v = eta_pack(f.eta);
        for (int i = 0; i < kEtaDim; ++i) {
            const double dd = v[i] - d.mean[i];
            d.var[i] += dd * dd;
        }
    }
    for (int i = 0; i < kEtaDim; ++i) d.var[i] /= n;
    return d;
}

SimulatorParams sample_eta(const EtaDistribution& dist, Rng& rng) {
    std::array<double, kEtaDim> v;
    for (int i = 0; i < kEtaDim; ++i) {
        v[i] = dist.var[i] > 0.0 ? rng.normal(dist.mean[i], std::sqrt(dist.var[i]))
                                 : dist.mean[i];
    }
    return eta_unpack(repair_eta(v), SimulatorParams::defaults());
}

SimulatorParams sample_eta(const EtaDistribution& dist, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_eta(dist, rng);
}

std::vector<Heartbeat> simulator_only_generate(const EtaDistribution& dist, int n,
                                               double noise_sigma, std::uint64_t rng_seed) {
    if (n < 1) throw std::invalid_argument("simulator_only_generate: n must be >= 1");
    Rng rng(rng_seed);
    std::vector<Heartbeat> beats;
    beats.reserve(static_cast<std::size_t>(n));
    long failures = 0;
    const long max_failures = 10L * n;
    for (int i = 0; i < n; ++i) {
        for (;;) {
            SimulatorParams p = sample_eta(dist, rng);
            auto v = eta_pack(p);
            if (noise_sigma > 0.0) {
                for (int c = 0; c < kEtaDim; ++c) {
                    v[c] += rng.normal() * noise_sigma * std::abs(dist.mean[c]);
                }
                p = eta_unpack(repair_eta(v), p);
            }
            try {
                Trajectory traj = integrate(p, default_init());
                Heartbeat hb;
                hb.samples = traj.z();
                hb.label = dist.class_label;
                hb.source = BeatSource::kSimulator;
                hb.record_id =
                    std::string("sim:") + label_to_char(dist.class_label) + ":" +
                    std::to_string(i);
                beats.push_back(std::move(hb));
                break;
            } catch (const DivergenceError&) {
                if (++failures > max_failures) {
                    throw std::runtime_error(
                        "simulator_only_generate: too many divergent eta draws");
                }
            }
        }
    }
    return beats;
}

void save_fit_results_csv(const std::vector<FitResult>& fits, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open fit results file for writing: " + path);
    f << "residual,iterations,converged";
    for (int i = 0; i < kEtaDim; ++i) f << ',' << kEtaComponentNames[i];
    f << '\n';
    char buf[64];
    for (const FitResult& r : fits) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.residual);
        f << buf << ',' << r.iterations << ',' << (r.converged ? 1 : 0);
        const auto v = eta_pack(r.eta);
        for (int i = 0; i < kEtaDim; ++i) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v[i]);
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw InputError("failed writing fit results file: " + path);
}

}  // namespace cardioforge

#include "cardioforge/sim_gan.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cardioforge/checkpoint.hpp"
#include "cardioforge/config.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/euler_loss.hpp"
#include "cardioforge/rng.hpp"
#include "cardioforge/version.hpp"

namespace cardioforge {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kRefineNoiseSigma = 0.05;

std::int64_t scaled(double base, double scale) {
    return std::max<std::int64_t>(1, std::llround(base * scale));
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

bool is_sim_regime(GanRegime regime) {
    return regime == GanRegime::kSimVgan || regime == GanRegime::kSimDcgan;
}

const char* regime_name(GanRegime regime) {
    switch (regime) {
        case GanRegime::kVgan: return "vgan";
        case GanRegime::kDcgan: return "dcgan";
        case GanRegime::kSimVgan: return "sim_vgan";
        case GanRegime::kSimDcgan: return "sim_dcgan";
        case GanRegime::kRefineGan: return "refine_gan";
    }
    throw std::invalid_argument("bad regime");
}

GanRegime regime_from_name(const std::string& name) {
    if (name == "vgan") return GanRegime::kVgan;
    if (name == "dcgan") return GanRegime::kDcgan;
    if (name == "sim_vgan") return GanRegime::kSimVgan;
    if (name == "sim_dcgan") return GanRegime::kSimDcgan;
    if (name == "refine_gan") return GanRegime::kRefineGan;
    throw InputError("unknown GAN regime '" + name +
                     "' (expected vgan, dcgan, sim_vgan, sim_dcgan or refine_gan)");
}

void GanConfig::validate() const {
    if (noise_dim < 1) throw InputError("noise_dim must be >= 1");
    if (beat_len != kBeatLen) {
        throw InputError("beat_len must be 216 (the deconv ladder targets 216)");
    }
    if (!(scale > 0.0)) throw InputError("scale must be > 0");
    if (!(lr > 0.0)) throw InputError("lr must be > 0");
    if (g_steps_per_iter < 1 || d_steps_per_iter < 1) {
        throw InputError("per-iteration step counts must be >= 1");
    }
    if (batch_size < 2) throw InputError("batch_size must be >= 2 (batchnorm)");
    if (iterations < 0) throw InputError("iterations must be >= 0");
    if (lambda_eul < 0.0) throw InputError("lambda_eul must be >= 0");
    if (n_eta_samples < 1) throw InputError("n_eta_samples must be >= 1");
}

GanConfig gan_config_from_kv(const KvConfig& kv) {
    GanConfig c;
    c.regime = regime_from_name(kv.get_str("regime", regime_name(c.regime)));
    c.noise_dim = static_cast<int>(kv.get_int("noise_dim", c.noise_dim));
    c.beat_len = static_cast<int>(kv.get_int("beat_len", c.beat_len));
    c.scale = kv.get_double("scale", c.scale);
    c.lr = kv.get_double("lr", c.lr);
    c.g_steps_per_iter = static_cast<int>(kv.get_int("g_steps_per_iter", c.g_steps_per_iter));
    c.d_steps_per_iter = static_cast<int>(kv.get_int("d_steps_per_iter", c.d_steps_per_iter));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.iterations = static_cast<int>(kv.get_int("iterations", c.iterations));
    c.lambda_eul = kv.get_double("lambda_eul", c.lambda_eul);
    c.n_eta_samples = static_cast<int>(kv.get_int("n_eta_samples", c.n_eta_samples));
    c.seed = kv.get_u64("seed", c.seed);
    c.batchnorm_first_layer = kv.get_bool("batchnorm_first_layer", c.batchnorm_first_layer);
    return c;
}

KvConfig gan_config_to_kv(const GanConfig& c) {
    KvConfig kv;
    kv.set("regime", regime_name(c.regime));
    kv.set_int("noise_dim", c.noise_dim);
    kv.set_int("beat_len", c.beat_len);
    kv.set_double("scale", c.scale);
    kv.set_double("lr", c.lr);
    kv.set_int("g_steps_per_iter", c.g_steps_per_iter);
    kv.set_int("d_steps_per_iter", c.d_steps_per_iter);
    kv.set_int("batch_size", c.batch_size);
    kv.set_int("iterations", c.iterations);
    kv.set_double("lambda_eul", c.lambda_eul);
    kv.set_int("n_eta_samples", c.n_eta_samples);
    kv.values["seed"] = std::to_string(c.seed);
    kv.set("batchnorm_first_layer", c.batchnorm_first_layer ? "true" : "false");
    return kv;
}

// ---- generator -----------------------------------------------------------

TensorPtr Generator::forward(Graph& g, const TensorPtr& input, bool training) const {
    if (input->shape.size() != 2 || input->shape[1] != input_dim) {
        throw std::invalid_argument("generator input must be [N, input_dim]");
    }
    const std::int64_t n = input->shape[0];
    if (regime == GanRegime::kVgan || regime == GanRegime::kSimVgan) {
        TensorPtr h = input;
        for (std::size_t i = 0; i < fcs.size(); ++i) {
            h = fcs[i].forward(g, h);
            h = fc_bns[i].forward(g, h, training);
            h = relu(g, h);
        }
        return out_fc.forward(g, h);
    }
    TensorPtr h = project.forward(g, input);
    h = reshape(g, h, {n, channels0, 4});
    h = project_bn.forward(g, h, training);
    h = relu(g, h);
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
        h = deconvs[i].forward(g, h);
        if (h->shape[2] > target_lens[i]) h = narrow_time(g, h, target_lens[i]);
        if (i + 1 < deconvs.size()) {
            h = deconv_bns[i].forward(g, h, training);
            h = relu(g, h);
        }
    }
    return reshape(g, h, {n, static_cast<std::int64_t>(beat_len)});
}

void Generator::named(NamedTensors& out, const std::string& prefix) const {
    if (regime == GanRegime::kVgan || regime == GanRegime::kSimVgan) {
        for (std::size_t i = 0; i < fcs.size(); ++i) {
            fcs[i].named(out, prefix + "/fc" + std::to_string(i));
            fc_bns[i].named(out, prefix + "/fc_bn" + std::to_string(i));
        }
        out_fc.named(out, prefix + "/out");
        return;
    }
    project.named(out, prefix + "/project");
    project_bn.named(out, prefix + "/project_bn");
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
        deconvs[i].named(out, prefix + "/deconv" + std::to_string(i));
        if (i + 1 < deconvs.size()) {
            deconv_bns[i].named(out, prefix + "/deconv_bn" + std::to_string(i));
        }
    }
}

std::vector<TensorPtr> Generator::parameters() const {
    NamedTensors named_list;
    named(named_list, "g");
    std::vector<TensorPtr> out;
    for (const auto& [name, t] : named_list) {
        if (t->requires_grad) out.push_back(t);
    }
    return out;
}

Generator build_generator(const GanConfig& config, std::uint64_t init_seed) {
    config.validate();
    Rng rng(init_seed);
    Generator gen;
    gen.regime = config.regime;
    gen.beat_len = config.beat_len;
    gen.input_dim =
        config.regime == GanRegime::kRefineGan ? config.beat_len : config.noise_dim;

    if (config.regime == GanRegime::kVgan || config.regime == GanRegime::kSimVgan) {
        const std::int64_t w = scaled(512.0, config.scale);
        gen.fcs.emplace_back(gen.input_dim, w, rng);
        gen.fc_bns.emplace_back(w);
        gen.fcs.emplace_back(w, w, rng);
        gen.fc_bns.emplace_back(w);
        gen.out_fc = LinearLayer(w, config.beat_len, rng);
        return gen;
    }

    gen.channels0 = scaled(256.0, config.scale);
    gen.project = LinearLayer(gen.input_dim, gen.channels0 * 4, rng);
    gen.project_bn = BatchNorm1dLayer(gen.channels0);
    gen.target_lens = {7, 14, 27, 54, 108, 216};
    std::int64_t ch = gen.channels0;
    for (int i = 0; i < 6; ++i) {
        const std::int64_t next =
            i == 5 ? 1 : std::max<std::int64_t>(1, gen.channels0 >> (i + 1));
        const int stride = i == 0 ? 1 : 2;
        const int padding = i == 0 ? 0 : 1;
        gen.deconvs.emplace_back(ch, next, 4, stride, padding, rng);
        if (i < 5) gen.deconv_bns.emplace_back(next);
        ch = next;
    }
    return gen;
}

// ---- discriminator ---------------------------------------------------------

TensorPtr Discriminator::forward(Graph& g, const TensorPtr& x, bool training) const {
    if (x->shape.size() != 2 || x->shape[1] != beat_len) {
        throw std::invalid_argument("discriminator input must be [N, beat_len]");
    }
    const std::int64_t n = x->shape[0];
    TensorPtr h;
    if (regime == GanRegime::kVgan || regime == GanRegime::kSimVgan) {
        h = x;
        for (std::size_t i = 0; i < fcs.size(); ++i) {
            h = fcs[i].forward(g, h);
            if (i > 0 || batchnorm_first_layer) {
                h = fc_bns[i].forward(g, h, training);
            }
            h = leaky_relu(g, h, kLeakySlope);
        }
    } else {
        h = reshape(g, x, {n, 1, static_cast<std::int64_t>(beat_len)});
        for (std::size_t i = 0; i < convs.size(); ++i) {
            h = convs[i].forward(g, h);
            if (i > 0 || batchnorm_first_layer) {
                h = conv_bns[i].forward(g, h, training);
            }
            h = leaky_relu(g, h, kLeakySlope);
        }
        h = reshape(g, h, {n, h->shape[1] * h->shape[2]});
    }
    return sigmoid(g, head.forward(g, h));
}

void Discriminator::named(NamedTensors& out, const std::string& prefix) const {
    if (regime == GanRegime::kVgan || regime == GanRegime::kSimVgan) {
        for (std::size_t i = 0; i < fcs.size(); ++i) {
            fcs[i].named(out, prefix + "/fc" + std::to_string(i));
            if (i > 0 || batchnorm_first_layer) {
                fc_bns[i].named(out, prefix + "/fc_bn" + std::to_string(i));
            }
        }
    } else {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs[i].named(out, prefix + "/conv" + std::to_string(i));
            if (i > 0 || batchnorm_first_layer) {
                conv_bns[i].named(out, prefix + "/conv_bn" + std::to_string(i));
            }
        }
    }
    head.named(out, prefix + "/head");
}

std::vector<TensorPtr> Discriminator::parameters() const {
    NamedTensors named_list;
    named(named_list, "d");
    std::vector<TensorPtr> out;
    for (const auto& [name, t] : named_list) {
        if (t->requires_grad) out.push_back(t);
    }
    return out;
}

Discriminator build_discriminator(const GanConfig& config, std::uint64_t init_seed) {
    config.validate();
    Rng rng(init_seed);
    Discriminator disc;
    disc.regime = config.regime;
    disc.beat_len = config.beat_len;
    disc.batchnorm_first_layer = config.batchnorm_first_layer;

    // Sim and refine flavours reuse the DCGAN body; only the losses and
    // generator inputs differ.
    if (config.regime == GanRegime::kVgan || config.regime == GanRegime::kSimVgan) {
        const std::int64_t w = scaled(512.0, config.scale);
        disc.fcs.emplace_back(config.beat_len, w, rng);
        disc.fc_bns.emplace_back(w);
        disc.fcs.emplace_back(w, w, rng);
        disc.fc_bns.emplace_back(w);
        disc.head = LinearLayer(w, 1, rng);
        return disc;
    }

    const std::int64_t base = scaled(16.0, config.scale);
    std::int64_t in_ch = 1;
    std::int64_t len = config.beat_len;
    for (int i = 0; i < 6; ++i) {
        const std::int64_t out_ch = base << std::min(i, 5);
        const int stride = (i >= 1 && i <= 4) ? 2 : 1;
        disc.convs.emplace_back(in_ch, out_ch, 5, stride, 2, rng);
        disc.conv_bns.emplace_back(out_ch);
        len = (len + 2 * 2 - 5) / stride + 1;
        in_ch = out_ch;
    }
    disc.head = LinearLayer(in_ch * len, 1, rng);
    return disc;
}

// ---- losses -----------------------------------------------------------------

TensorPtr d_loss(Graph& g, const Discriminator& disc, const TensorPtr& real,
                 const TensorPtr& fake, bool training) {
    if (real->shape.empty() || real->shape[0] < 1 || fake->shape.empty() ||
        fake->shape[0] < 1) {
        throw std::invalid_argument("d_loss: empty batch");
    }
    const TensorPtr d_real = disc.forward(g, real, training);
    const TensorPtr d_fake = disc.forward(g, fake, training);
    const TensorPtr lhs = mul_scalar(g, mean_all(g, safe_log(g, d_real)), -1.0);
    const TensorPtr rhs =
        mul_scalar(g, mean_all(g, safe_log(g, one_minus(g, d_fake))), -1.0);
    return add(g, lhs, rhs);
}

double GLossResult::total() const { return ce_value + lambda * eul_value; }

GLossResult g_loss(Graph& g, const Discriminator& disc, const TensorPtr& fake,
                   GanRegime regime, const EtaDistribution* eta_dist, double lambda_eul,
                   int n_eta_samples, Rng& eta_rng, bool training) {
    if (fake->shape.size() != 2 || fake->shape[0] < 1) {
        throw std::invalid_argument("g_loss: fake batch must be [N, L]");
    }
    GLossResult out;
    out.lambda = lambda_eul;
    const TensorPtr d_fake = disc.forward(g, fake, training);
    out.ce = mul_scalar(g, mean_all(g, safe_log(g, d_fake)), -1.0);
    out.ce_value = out.ce->data[0];
    if (!is_sim_regime(regime)) return out;

    if (eta_dist == nullptr) {
        throw InputError("sim regime requires an eta distribution");
    }
    const std::int64_t n = fake->shape[0];
    const std::int64_t L = fake->shape[1];
    std::vector<std::vector<double>> batch(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        batch[static_cast<std::size_t>(i)].assign(fake->data.begin() + i * L,
                                                  fake->data.begin() + (i + 1) * L);
    }
    const EulerLossResult el = euler_loss(batch, *eta_dist, n_eta_samples, eta_rng.raw());
    out.eul_value = el.value;
    // The residual gradient enters the tape as an external seed on the fake
    // tensor; backward() then carries it through the generator.
    fake->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t l = 0; l < L; ++l) {
            fake->grad[i * L + l] +=
                lambda_eul * el.grads[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
        }
    }
    return out;
}

TensorPtr refine_gan_input(const EtaDistribution& dist, int batch_size,
                           std::uint64_t rng_seed) {
    if (batch_size < 1) throw std::invalid_argument("refine_gan_input: batch_size < 1");
    const auto beats =
        simulator_only_generate(dist, batch_size, kRefineNoiseSigma, rng_seed);
    auto t = Tensor::create({static_cast<std::int64_t>(beats.size()), kBeatLen}, false);
    for (std::size_t i = 0; i < beats.size(); ++i) {
        std::copy(beats[i].samples.begin(), beats[i].samples.end(),
                  t->data.begin() + static_cast<std::int64_t>(i) * kBeatLen);
    }
    return t;
}

// ---- model ---------------------------------------------------------------------

NamedTensors GanModel::named() const {
    NamedTensors out;
    gen.named(out, "gen");
    disc.named(out, "disc");
    return out;
}

void TrainingLog::save_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open training log for writing: " + path);
    f << (sim_regime ? "iter,loss_d,loss_g_ce,loss_g_eul,probe_sim_dist\n"
                     : "iter,loss_d,loss_g_ce\n");
    char buf[200];
    for (const TrainLogRow& r : rows) {
        if (sim_regime) {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                          static_cast<long long>(r.iter), r.loss_d, r.loss_g_ce,
                          r.loss_g_eul, r.probe_sim_dist);
        } else {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                          static_cast<long long>(r.iter), r.loss_d, r.loss_g_ce);
        }
        f << buf;
    }
    if (!f) throw InputError("failed writing training log: " + path);
}

namespace {

TensorPtr batch_tensor(const std::vector<Heartbeat>& beats,
                       const std::vector<std::size_t>& idx) {
    auto t = Tensor::create({static_cast<std::int64_t>(idx.size()), kBeatLen}, false);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& s = beats[idx[i]].samples;
        std::copy(s.begin(), s.end(), t->data.begin() + static_cast<std::int64_t>(i) * kBeatLen);
    }
    return t;
}

TensorPtr noise_tensor(Rng& rng, std::int64_t n, std::int64_t dim) {
    auto t = Tensor::create({n, dim}, false);
    for (double& v : t->data) v = rng.normal();
    return t;
}

}  // namespace

GanTrainOutput train_gan(const GanConfig& config, const std::vector<Heartbeat>& real_beats,
                         const std::optional<EtaDistribution>& eta_dist,
                         const std::string& diagnostics_checkpoint) {
    config.validate();
    if (real_beats.empty()) throw std::invalid_argument("train_gan: no training beats");
    const BeatLabel cls = real_beats[0].label;
    for (const Heartbeat& b : real_beats) {
        b.validate();
        if (b.label != cls) {
            throw std::invalid_argument("train_gan: beats must all share one class");
        }
    }
    const bool needs_dist =
        is_sim_regime(config.regime) || config.regime == GanRegime::kRefineGan;
    if (needs_dist && !eta_dist.has_value()) {
        throw InputError(std::string(regime_name(config.regime)) +
                         " training requires an eta distribution");
    }

    GanTrainOutput out;
    out.model.config = config;
    out.model.class_label = cls;
    out.model.gen = build_generator(config, Rng::derive(config.seed, 1));
    out.model.disc = build_discriminator(config, Rng::derive(config.seed, 2));
    out.model.eta_dist = eta_dist;
    out.log.sim_regime = is_sim_regime(config.regime);

    Rng data_rng(Rng::derive(config.seed, 3));
    Rng eta_rng(Rng::derive(config.seed, 4));
    Rng probe_rng(Rng::derive(config.seed, 5));

    const std::vector<TensorPtr> g_params = out.model.gen.parameters();
    const std::vector<TensorPtr> d_params = out.model.disc.parameters();
    AdamState g_state, d_state;
    g_state.lr = d_state.lr = config.lr;
    g_state.init(g_params);
    d_state.init(d_params);

    // Fixed probe batch: the residual metric is tracked on the same inputs
    // (and the same eta draws) across the whole run.
    const int probe_n = std::min(16, config.batch_size);
    TensorPtr probe_input;
    std::vector<SimulatorParams> probe_etas;
    if (out.log.sim_regime) {
        probe_input = config.regime == GanRegime::kRefineGan
                          ? refine_gan_input(*eta_dist, probe_n, Rng::derive(config.seed, 6))
                          : noise_tensor(probe_rng, probe_n, out.model.gen.input_dim);
        for (int i = 0; i < probe_n; ++i) probe_etas.push_back(sample_eta(*eta_dist, probe_rng));
    }

    auto abort_run = [&](const std::string& what, int iter) {
        if (!diagnostics_checkpoint.empty()) {
            save_checkpoint(diagnostics_checkpoint, out.model.named());
        }
        throw TrainAbortError("training aborted at iteration " + std::to_string(iter) +
                                  ": " + what,
                              static_cast<std::size_t>(iter));
    };

    auto gen_input = [&](std::int64_t n) -> TensorPtr {
        if (config.regime == GanRegime::kRefineGan) {
            return refine_gan_input(*eta_dist, static_cast<int>(n), data_rng.raw());
        }
        return noise_tensor(data_rng, n, out.model.gen.input_dim);
    };

    const std::size_t n_real = real_beats.size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(config.batch_size));
    out.log.rows.reserve(static_cast<std::size_t>(config.iterations));

    for (int iter = 0; iter < config.iterations; ++iter) {
        double last_d = 0.0;
        for (int ds = 0; ds < config.d_steps_per_iter; ++ds) {
            Graph g;
            for (auto& i : idx) i = static_cast<std::size_t>(data_rng.below(n_real));
            const TensorPtr real = batch_tensor(real_beats, idx);
            const TensorPtr fake =
                detach(out.model.gen.forward(g, gen_input(config.batch_size), true));
            const TensorPtr loss = d_loss(g, out.model.disc, real, fake, true);
            last_d = loss->data[0];
            if (!finite(last_d)) abort_run("non-finite discriminator loss", iter);
            zero_grads(d_params);
            g.backward(loss);
            adam_step(d_params, d_state);
            ++out.log.d_adam_steps;
        }
        double last_ce = 0.0;
        double last_eul = 0.0;
        for (int gs = 0; gs < config.g_steps_per_iter; ++gs) {
            Graph g;
            const TensorPtr fake =
                out.model.gen.forward(g, gen_input(config.batch_size), true);
            const GLossResult gl =
                g_loss(g, out.model.disc, fake, config.regime,
                       eta_dist.has_value() ? &*eta_dist : nullptr, config.lambda_eul,
                       config.n_eta_samples, eta_rng, true);
            last_ce = gl.ce_value;
            last_eul = gl.eul_value;
            if (!finite(gl.total())) abort_run("non-finite generator loss", iter);
            zero_grads(g_params);
            zero_grads(d_params);  // discriminator grads from this pass are discarded
            g.backward(gl.ce);
            adam_step(g_params, g_state);
            ++out.log.g_adam_steps;
        }
        TrainLogRow row;
        row.iter = iter;
        row.loss_d = last_d;
        row.loss_g_ce = last_ce;
        row.loss_g_eul = last_eul;
        if (out.log.sim_regime) {
            Graph g;
            const TensorPtr probe_fake = out.model.gen.forward(g, probe_input, false);
            double acc = 0.0;
            for (int i = 0; i < probe_n; ++i) {
                const std::span<const double> row_view(
                    probe_fake->data.data() + static_cast<std::int64_t>(i) * kBeatLen,
                    kBeatLen);
                acc += sim_distance(row_view, probe_etas[static_cast<std::size_t>(i)]).value;
            }
            row.probe_sim_dist = acc / probe_n;
        }
        out.log.rows.push_back(row);
    }
    return out;
}

std::vector<Heartbeat> gan_generate(const GanModel& model, int n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("gan_generate: negative count");
    std::vector<Heartbeat> beats;
    beats.reserve(static_cast<std::size_t>(n));
    Rng rng(Rng::derive(seed, 0xfe));
    int made = 0;
    std::uint64_t chunk = 0;
    while (made < n) {
        const int b = std::min(model.config.batch_size, n - made);
        TensorPtr input;
        if (model.config.regime == GanRegime::kRefineGan) {
            if (!model.eta_dist.has_value()) {
                throw InputError("refine_gan model is missing its eta distribution");
            }
            input = refine_gan_input(*model.eta_dist, b, Rng::derive(seed, 0x100 + chunk));
        } else {
            input = noise_tensor(rng, b, model.gen.input_dim);
        }
        Graph g;
        const TensorPtr fake = model.gen.forward(g, input, false);
        for (int i = 0; i < b; ++i) {
            Heartbeat hb;
            hb.samples.assign(fake->data.begin() + static_cast<std::int64_t>(i) * kBeatLen,
                              fake->data.begin() + static_cast<std::int64_t>(i + 1) * kBeatLen);
            hb.label = model.class_label;
            hb.source = BeatSource::kGan;
            hb.record_id = std::string("gan:") + label_to_char(model.class_label) + ":" +
                           std::to_string(made + i);
            beats.push_back(std::move(hb));
        }
        made += b;
        ++chunk;
    }
    return beats;
}

void save_gan_model(const GanModel& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    KvConfig meta = gan_config_to_kv(model.config);
    meta.set("format_version", "1");
    meta.set("class", std::string(1, label_to_char(model.class_label)));
    meta.set("has_eta_dist", model.eta_dist.has_value() ? "true" : "false");
    meta.save((fs::path(dir) / "model.meta").string());
    save_checkpoint((fs::path(dir) / "params.ckpt").string(), model.named());
    if (model.eta_dist.has_value()) {
        model.eta_dist->save((fs::path(dir) / "eta_dist.txt").string());
    }
}

GanModel load_gan_model(const std::string& dir) {
    namespace fs = std::filesystem;
    const KvConfig meta = KvConfig::load((fs::path(dir) / "model.meta").string());
    GanModel model;
    model.config = gan_config_from_kv(meta);
    const std::string cls = meta.get_str("class", "");
    if (cls.size() != 1) throw InputError("model.meta missing class in " + dir);
    model.class_label = label_from_char(cls[0]);
    model.gen = build_generator(model.config, 0);
    model.disc = build_discriminator(model.config, 0);
    restore_checkpoint((fs::path(dir) / "params.ckpt").string(), model.named());
    if (meta.get_bool("has_eta_dist", false)) {
        model.eta_dist = EtaDistribution::load((fs::path(dir) / "eta_dist.txt").string());
    }
    return model;
}

}  // namespace cardioforge

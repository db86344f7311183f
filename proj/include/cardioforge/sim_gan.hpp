#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cardioforge/beat_data.hpp"
#include "cardioforge/nn.hpp"
#include "cardioforge/param_estimation.hpp"

namespace cardioforge {

enum class GanRegime { kVgan, kDcgan, kSimVgan, kSimDcgan, kRefineGan };

/// The sim regimes add the residual loss to the generator objective.
bool is_sim_regime(GanRegime regime);
const char* regime_name(GanRegime regime);
GanRegime regime_from_name(const std::string& name);

struct GanConfig {
    GanRegime regime = GanRegime::kDcgan;
    int noise_dim = 100;
    int beat_len = kBeatLen;
    double scale = 1.0;  // width multiplier for desk-scale runs
    double lr = 0.0002;
    int g_steps_per_iter = 2;
    int d_steps_per_iter = 1;
    int batch_size = 32;
    int iterations = 3000;
    double lambda_eul = 1.0;
    int n_eta_samples = 1;
    std::uint64_t seed = 0;
    /// Restores the literal batchnorm-after-every-layer reading (the default
    /// skips normalisation on the first discriminator layer).
    bool batchnorm_first_layer = false;

    void validate() const;
};

struct KvConfig;
GanConfig gan_config_from_kv(const KvConfig& kv);
KvConfig gan_config_to_kv(const GanConfig& config);

/// Noise (or refined simulator beat) to heartbeat map. The DCGAN flavour
/// projects to [256*scale, 4] and doubles the length through six transposed
/// convolutions (4-7-14-27-54-108-216); the VGAN flavour is three
/// fully-connected layers of width 512*scale. Output is linear.
struct Generator {
    GanRegime regime = GanRegime::kDcgan;
    int input_dim = 100;
    int beat_len = kBeatLen;

    LinearLayer project;
    BatchNorm1dLayer project_bn;
    std::vector<Deconv1dLayer> deconvs;
    std::vector<BatchNorm1dLayer> deconv_bns;
    std::vector<std::int64_t> target_lens;
    std::int64_t channels0 = 0;

    std::vector<LinearLayer> fcs;  // VGAN path
    std::vector<BatchNorm1dLayer> fc_bns;
    LinearLayer out_fc;

    /// input [N, input_dim] -> beats [N, beat_len].
    TensorPtr forward(Graph& g, const TensorPtr& input, bool training) const;
    void named(NamedTensors& out, const std::string& prefix) const;
    std::vector<TensorPtr> parameters() const;
};

/// Beat to real-probability map: six stride-laddered convolutions (kernel 5)
/// with leaky ReLU 0.2, or three fully-connected layers for VGAN, ending in
/// one sigmoid unit.
struct Discriminator {
    GanRegime regime = GanRegime::kDcgan;
    int beat_len = kBeatLen;
    bool batchnorm_first_layer = false;

    std::vector<Conv1dLayer> convs;
    std::vector<BatchNorm1dLayer> conv_bns;
    std::vector<LinearLayer> fcs;
    std::vector<BatchNorm1dLayer> fc_bns;
    LinearLayer head;

    /// x [N, beat_len] -> probabilities [N, 1] in (0, 1).
    TensorPtr forward(Graph& g, const TensorPtr& x, bool training) const;
    void named(NamedTensors& out, const std::string& prefix) const;
    std::vector<TensorPtr> parameters() const;
};

Generator build_generator(const GanConfig& config, std::uint64_t init_seed);
Discriminator build_discriminator(const GanConfig& config, std::uint64_t init_seed);

/// -E log D(real) - E log(1 - D(fake)), means over the batch rows.
TensorPtr d_loss(Graph& g, const Discriminator& disc, const TensorPtr& real,
                 const TensorPtr& fake, bool training);

struct GLossResult {
    TensorPtr ce;            // cross-entropy part, on the tape
    double ce_value = 0.0;
    double eul_value = 0.0;  // residual part (zero for non-sim regimes)
    double lambda = 1.0;
    double total() const;    // ce + lambda * eul
};

/// -E log D(fake), plus for sim regimes lambda times the Monte-Carlo residual
/// loss whose gradient is seeded directly into `fake` ahead of backward().
/// Throws InputError when a sim regime has no eta distribution.
GLossResult g_loss(Graph& g, const Discriminator& disc, const TensorPtr& fake,
                   GanRegime regime, const EtaDistribution* eta_dist, double lambda_eul,
                   int n_eta_samples, Rng& eta_rng, bool training);

/// Simulator beats used as generator inputs in the refine regime; identical
/// to simulator_only_generate output for the same seed, as a [B, 216] tensor.
TensorPtr refine_gan_input(const EtaDistribution& dist, int batch_size,
                           std::uint64_t rng_seed);

struct GanModel {
    GanConfig config;
    BeatLabel class_label = BeatLabel::kN;
    Generator gen;
    Discriminator disc;
    std::optional<EtaDistribution> eta_dist;

    NamedTensors named() const;
};

struct TrainLogRow {
    std::int64_t iter = 0;
    double loss_d = 0.0;
    double loss_g_ce = 0.0;
    double loss_g_eul = 0.0;    // sim regimes only
    double probe_sim_dist = 0.0;  // sim regimes only
};

struct TrainingLog {
    bool sim_regime = false;  // controls which columns exist
    std::vector<TrainLogRow> rows;
    std::int64_t d_adam_steps = 0;
    std::int64_t g_adam_steps = 0;

    /// CSV: "iter,loss_d,loss_g_ce,loss_g_eul,probe_sim_dist" for sim
    /// regimes; the residual columns are absent otherwise.
    void save_csv(const std::string& path) const;
};

struct GanTrainOutput {
    GanModel model;
    TrainingLog log;
};

/// Full training loop: per iteration d_steps_per_iter discriminator updates
/// then g_steps_per_iter generator updates with fresh noise each step.
/// On a non-finite loss the current parameters are checkpointed to
/// diagnostics_checkpoint (when non-empty) and TrainAbortError is thrown.
GanTrainOutput train_gan(const GanConfig& config, const std::vector<Heartbeat>& real_beats,
                         const std::optional<EtaDistribution>& eta_dist,
                         const std::string& diagnostics_checkpoint = "");

std::vector<Heartbeat> gan_generate(const GanModel& model, int n, std::uint64_t seed);

void save_gan_model(const GanModel& model, const std::string& dir);
GanModel load_gan_model(const std::string& dir);

}  // namespace cardioforge

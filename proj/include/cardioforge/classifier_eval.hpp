#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardioforge/beat_data.hpp"
#include "cardioforge/nn.hpp"

namespace cardioforge {

struct KvConfig;

/// Allowed augmentation sizes, as multiples of the class size.
extern const std::vector<double> kAugmentGrid;

struct ClassifierConfig {
    int n_blocks = 5;
    int kernels_per_conv = 32;
    int kernel_size = 5;
    int fc_width = 32;
    int n_classes = 4;
    double scale = 1.0;  // width multiplier applied to kernels and fc width
    double lr = 0.001;
    int epochs_phase1 = 50;
    int epochs_phase2 = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;
    /// Synthetic beats to add per class, as a multiple of the class size;
    /// must sit on the grid (or be 0 for no augmentation).
    double augment_multiple = 1.0;

    void validate() const;
};

ClassifierConfig classifier_config_from_kv(const KvConfig& kv);
KvConfig classifier_config_to_kv(const ClassifierConfig& config);

struct ResidualBlock {
    Conv1dLayer conv1, conv2;
};

/// Front convolution, five residual conv blocks (two convs + two ReLUs +
/// skip + max-pool each), then two hidden fully-connected layers and a
/// softmax head. Lengths run 216-108-54-27-13-6.
struct Classifier {
    ClassifierConfig config;
    Conv1dLayer conv0;
    std::vector<ResidualBlock> blocks;
    LinearLayer fc1, fc2, fc3;

    /// x [N, 216] -> class probabilities [N, n_classes].
    TensorPtr forward(Graph& g, const TensorPtr& x, bool training) const;
    NamedTensors named() const;
    std::vector<TensorPtr> parameters() const;
};

Classifier build_classifier(const ClassifierConfig& config);

struct ClassifierTrainRow {
    int phase = 1;
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct ClassifierTrainResult {
    Classifier model;
    std::vector<ClassifierTrainRow> log;
    void save_log_csv(const std::string& path) const;
};

/// Two-phase training: phase 1 on the base set until the loss stops
/// improving by more than 1e-4 over five epochs (capped at epochs_phase1);
/// phase 2, when synthetic beats are supplied, continues on base + synth.
/// base must be a train split and synth must contain no real-sourced beats.
ClassifierTrainResult train_classifier(const ClassifierConfig& config,
                                       const BeatDataset& base,
                                       const std::vector<Heartbeat>* synth,
                                       const std::string& diagnostics_checkpoint = "");

/// Eval-mode class probabilities per beat.
std::vector<std::array<double, 4>> classifier_scores(const Classifier& model,
                                                     const std::vector<Heartbeat>& beats);

void save_classifier(const Classifier& model, const std::string& dir);
Classifier load_classifier(const std::string& dir);

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

/// One-vs-rest precision-recall curve: one point per distinct score,
/// thresholds descending (recall non-decreasing), prediction rule
/// score >= threshold. auprc uses step-wise interpolation.
struct PrCurve {
    BeatLabel class_label = BeatLabel::kN;
    std::vector<PrPoint> points;
    double auprc = 0.0;
};

/// Throws std::invalid_argument when sizes differ or no positive exists.
PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& truth);

struct RegimeArtifact {
    std::string name;
    const Classifier* model = nullptr;  // null marks a missing artifact
};

struct RegimeReport {
    struct Entry {
        std::string regime;
        bool present = false;
        std::vector<PrCurve> curves;
    };
    std::vector<Entry> entries;

    std::string summary_text() const;
    /// Per-curve CSVs ("<regime>_<class>.csv", rows threshold,recall,precision)
    /// plus summary.txt.
    void save(const std::string& dir) const;
};

/// PR curves for every artifact over each class with at least one positive
/// in the test split; absent artifacts are reported as such, never invented.
RegimeReport evaluate_regimes(const std::vector<RegimeArtifact>& artifacts,
                              const BeatDataset& test);

}  // namespace cardioforge

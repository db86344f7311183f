#include "cardioforge/classifier_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cardioforge/checkpoint.hpp"
#include "cardioforge/config.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/rng.hpp"

namespace cardioforge {

const std::vector<double> kAugmentGrid = {0.1, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0};

void ClassifierConfig::validate() const {
    if (n_blocks < 1) throw InputError("n_blocks must be >= 1");
    if (kernels_per_conv < 1 || kernel_size < 1 || fc_width < 1) {
        throw InputError("layer sizes must be >= 1");
    }
    if (n_classes != kNumClasses) throw InputError("n_classes must be 4");
    if (!(scale > 0.0)) throw InputError("scale must be > 0");
    if (!(lr > 0.0)) throw InputError("lr must be > 0");
    if (epochs_phase1 < 0 || epochs_phase2 < 0) throw InputError("epoch budgets must be >= 0");
    if (batch_size < 2) throw InputError("batch_size must be >= 2 (batchnorm-free but "
                                         "batch statistics still need pairs)");
    if (augment_multiple != 0.0) {
        bool on_grid = false;
        for (double v : kAugmentGrid) {
            if (std::abs(augment_multiple - v) < 1e-12) on_grid = true;
        }
        if (!on_grid) {
            throw InputError("augment_multiple must be 0 or one of "
                             "{0.1, 0.3, 0.5, 0.8, 1, 1.5, 2}");
        }
    }
}

ClassifierConfig classifier_config_from_kv(const KvConfig& kv) {
    ClassifierConfig c;
    c.n_blocks = static_cast<int>(kv.get_int("n_blocks", c.n_blocks));
    c.kernels_per_conv = static_cast<int>(kv.get_int("kernels_per_conv", c.kernels_per_conv));
    c.kernel_size = static_cast<int>(kv.get_int("kernel_size", c.kernel_size));
    c.fc_width = static_cast<int>(kv.get_int("fc_width", c.fc_width));
    c.n_classes = static_cast<int>(kv.get_int("n_classes", c.n_classes));
    c.scale = kv.get_double("scale", c.scale);
    c.lr = kv.get_double("lr", c.lr);
    c.epochs_phase1 = static_cast<int>(kv.get_int("epochs_phase1", c.epochs_phase1));
    c.epochs_phase2 = static_cast<int>(kv.get_int("epochs_phase2", c.epochs_phase2));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.seed = kv.get_u64("seed", c.seed);
    c.augment_multiple = kv.get_double("augment_multiple", c.augment_multiple);
    return c;
}

KvConfig classifier_config_to_kv(const ClassifierConfig& c) {
    KvConfig kv;
    kv.set_int("n_blocks", c.n_blocks);
    kv.set_int("kernels_per_conv", c.kernels_per_conv);
    kv.set_int("kernel_size", c.kernel_size);
    kv.set_int("fc_width", c.fc_width);
    kv.set_int("n_classes", c.n_classes);
    kv.set_double("scale", c.scale);
    kv.set_double("lr", c.lr);
    kv.set_int("epochs_phase1", c.epochs_phase1);
    kv.set_int("epochs_phase2", c.epochs_phase2);
    kv.set_int("batch_size", c.batch_size);
    kv.values["seed"] = std::to_string(c.seed);
    kv.set_double("augment_multiple", c.augment_multiple);
    return kv;
}

namespace {

std::int64_t scaled(double base, double scale) {
    return std::max<std::int64_t>(1, std::llround(base * scale));
}

}  // namespace

TensorPtr Classifier::forward(Graph& g, const TensorPtr& x, bool training) const {
    (void)training;  // no normalisation layers; kept for interface symmetry
    if (x->shape.size() != 2 || x->shape[1] != kBeatLen) {
        throw std::invalid_argument("classifier input must be [N, 216]");
    }
    const std::int64_t n = x->shape[0];
    TensorPtr h = reshape(g, x, {n, 1, kBeatLen});
    h = conv0.forward(g, h);
    for (const ResidualBlock& blk : blocks) {
        TensorPtr inner = blk.conv2.forward(g, relu(g, blk.conv1.forward(g, h)));
        h = max_pool1d(g, relu(g, add(g, inner, h)), 2, 2);
    }
    h = reshape(g, h, {n, h->shape[1] * h->shape[2]});
    h = relu(g, fc1.forward(g, h));
    h = relu(g, fc2.forward(g, h));
    return softmax(g, fc3.forward(g, h));
}

NamedTensors Classifier::named() const {
    NamedTensors out;
    conv0.named(out, "clf/conv0");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].conv1.named(out, "clf/block" + std::to_string(i) + "/conv1");
        blocks[i].conv2.named(out, "clf/block" + std::to_string(i) + "/conv2");
    }
    fc1.named(out, "clf/fc1");
    fc2.named(out, "clf/fc2");
    fc3.named(out, "clf/fc3");
    return out;
}

std::vector<TensorPtr> Classifier::parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& [name, t] : named()) {
        if (t->requires_grad) out.push_back(t);
    }
    return out;
}

Classifier build_classifier(const ClassifierConfig& config) {
    config.validate();
    Rng rng(Rng::derive(config.seed, 11));
    Classifier clf;
    clf.config = config;
    const std::int64_t ch = scaled(config.kernels_per_conv, config.scale);
    const std::int64_t fcw = scaled(config.fc_width, config.scale);
    const int k = config.kernel_size;
    const int pad = k / 2;
    // No normalisation layers anywhere in this net, so weights are fan-in
    // scaled; a fixed 0.02 would shrink activations to ~1e-5 by the head and
    // park training at the entropy floor.
    const auto he = [](std::int64_t fan_in) {
        return std::sqrt(2.0 / static_cast<double>(fan_in));
    };
    clf.conv0 = Conv1dLayer(1, ch, k, 1, pad, rng, he(k));
    std::int64_t len = kBeatLen;
    for (int i = 0; i < config.n_blocks; ++i) {
        ResidualBlock blk;
        blk.conv1 = Conv1dLayer(ch, ch, k, 1, pad, rng, he(ch * k));
        blk.conv2 = Conv1dLayer(ch, ch, k, 1, pad, rng, he(ch * k));
        clf.blocks.push_back(std::move(blk));
        len = (len - 2) / 2 + 1;
    }
    clf.fc1 = LinearLayer(ch * len, fcw, rng, he(ch * len));
    clf.fc2 = LinearLayer(fcw, fcw, rng, he(fcw));
    clf.fc3 = LinearLayer(fcw, config.n_classes, rng, he(fcw));
    return clf;
}

namespace {

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

EpochStats run_epoch(Classifier& clf, const std::vector<const Heartbeat*>& beats,
                     std::vector<std::size_t>& order, Rng& rng,
                     const std::vector<TensorPtr>& params, AdamState& state,
                     int batch_size, int iter_tag,
                     const std::string& diagnostics_checkpoint) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t loss_batches = 0;
    std::int64_t correct = 0;
    std::int64_t seen = 0;
    Graph* graph = nullptr;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        const std::int64_t b = static_cast<std::int64_t>(end - start);
        if (b < 2) continue;  // batch statistics need at least a pair
        auto x = Tensor::create({b, kBeatLen}, false);
        std::vector<int> labels(static_cast<std::size_t>(b));
        for (std::int64_t i = 0; i < b; ++i) {
            const Heartbeat* hb = beats[order[start + static_cast<std::size_t>(i)]];
            std::copy(hb->samples.begin(), hb->samples.end(),
                      x->data.begin() + i * kBeatLen);
            labels[static_cast<std::size_t>(i)] = static_cast<int>(hb->label);
        }
        Graph g;
        graph = &g;
        const TensorPtr probs = clf.forward(g, x, true);
        const TensorPtr loss = nll_loss(g, probs, labels);
        const double lv = loss->data[0];
        if (!std::isfinite(lv)) {
            if (!diagnostics_checkpoint.empty()) {
                save_checkpoint(diagnostics_checkpoint, clf.named());
            }
            throw TrainAbortError("classifier training hit a non-finite loss",
                                  static_cast<std::size_t>(iter_tag));
        }
        loss_sum += lv;
        ++loss_batches;
        for (std::int64_t i = 0; i < b; ++i) {
            const double* row = probs->data.data() + i * clf.config.n_classes;
            int arg = 0;
            for (int c = 1; c < clf.config.n_classes; ++c) {
                if (row[c] > row[arg]) arg = c;
            }
            if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
        }
        seen += b;
        zero_grads(params);
        g.backward(loss);
        adam_step(params, state);
    }
    (void)graph;
    EpochStats s;
    s.loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    s.accuracy = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    return s;
}

// Loss-plateau stop: no improvement over the running best by more than 1e-4
// for five consecutive epochs.
class PlateauStop {
  public:
    bool update(double loss) {
        if (loss < best_ - 1e-4) {
            best_ = loss;
            stale_ = 0;
        } else {
            ++stale_;
        }
        return stale_ >= 5;
    }

  private:
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

}  // namespace

ClassifierTrainResult train_classifier(const ClassifierConfig& config,
                                       const BeatDataset& base,
                                       const std::vector<Heartbeat>* synth,
                                       const std::string& diagnostics_checkpoint) {
    config.validate();
    if (base.split != Split::kTrain) {
        throw std::invalid_argument("train_classifier: base dataset must be a train split");
    }
    base.validate();
    if (base.beats.empty()) throw std::invalid_argument("train_classifier: empty base set");
    if (synth != nullptr) {
        for (const Heartbeat& hb : *synth) {
            hb.validate();
            if (hb.source == BeatSource::kReal) {
                throw std::invalid_argument(
                    "train_classifier: synthetic pool contains real-sourced beats");
            }
        }
    }

    ClassifierTrainResult out;
    out.model = build_classifier(config);
    const std::vector<TensorPtr> params = out.model.parameters();
    AdamState state;
    state.lr = config.lr;
    state.init(params);
    Rng rng(Rng::derive(config.seed, 12));

    std::vector<const Heartbeat*> phase1;
    phase1.reserve(base.beats.size());
    for (const Heartbeat& hb : base.beats) phase1.push_back(&hb);
    std::vector<std::size_t> order(phase1.size());
    std::iota(order.begin(), order.end(), 0);

    PlateauStop stop1;
    for (int e = 0; e < config.epochs_phase1; ++e) {
        const EpochStats s = run_epoch(out.model, phase1, order, rng, params, state,
                                       config.batch_size, e, diagnostics_checkpoint);
        out.log.push_back({1, e, s.loss, s.accuracy});
        if (stop1.update(s.loss)) break;
    }

    if (synth != nullptr && !synth->empty()) {
        std::vector<const Heartbeat*> phase2 = phase1;
        for (const Heartbeat& hb : *synth) phase2.push_back(&hb);
        order.resize(phase2.size());
        std::iota(order.begin(), order.end(), 0);
        PlateauStop stop2;
        for (int e = 0; e < config.epochs_phase2; ++e) {
            const EpochStats s = run_epoch(out.model, phase2, order, rng, params, state,
                                           config.batch_size, e, diagnostics_checkpoint);
            out.log.push_back({2, e, s.loss, s.accuracy});
            if (stop2.update(s.loss)) break;
        }
    }
    return out;
}

void ClassifierTrainResult::save_log_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open classifier log for writing: " + path);
    f << "phase,epoch,loss,accuracy\n";
    char buf[120];
    for (const ClassifierTrainRow& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", r.phase, r.epoch, r.loss,
                      r.accuracy);
        f << buf;
    }
    if (!f) throw InputError("failed writing classifier log: " + path);
}

std::vector<std::array<double, 4>> classifier_scores(const Classifier& model,
                                                     const std::vector<Heartbeat>& beats) {
    std::vector<std::array<double, 4>> out(beats.size());
    constexpr std::int64_t kChunk = 64;
    for (std::size_t start = 0; start < beats.size(); start += kChunk) {
        const std::int64_t b =
            static_cast<std::int64_t>(std::min<std::size_t>(kChunk, beats.size() - start));
        auto x = Tensor::create({b, kBeatLen}, false);
        for (std::int64_t i = 0; i < b; ++i) {
            const auto& s = beats[start + static_cast<std::size_t>(i)].samples;
            std::copy(s.begin(), s.end(), x->data.begin() + i * kBeatLen);
        }
        Graph g;
        const TensorPtr probs = model.forward(g, x, false);
        for (std::int64_t i = 0; i < b; ++i) {
            for (int c = 0; c < 4; ++c) {
                out[start + static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
                    probs->data[i * 4 + c];
            }
        }
    }
    return out;
}

void save_classifier(const Classifier& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    KvConfig meta = classifier_config_to_kv(model.config);
    meta.set("format_version", "1");
    meta.save((fs::path(dir) / "model.meta").string());
    save_checkpoint((fs::path(dir) / "params.ckpt").string(), model.named());
}

Classifier load_classifier(const std::string& dir) {
    namespace fs = std::filesystem;
    const KvConfig meta = KvConfig::load((fs::path(dir) / "model.meta").string());
    Classifier clf = build_classifier(classifier_config_from_kv(meta));
    restore_checkpoint((fs::path(dir) / "params.ckpt").string(), clf.named());
    return clf;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) {
        throw std::invalid_argument("pr_curve: scores and truth differ in length");
    }
    if (scores.empty()) throw std::invalid_argument("pr_curve: empty input");
    std::int64_t positives = 0;
    for (int t : truth) positives += t != 0 ? 1 : 0;
    if (positives == 0) throw std::invalid_argument("pr_curve: no positive examples");

    // Sort by score descending; each distinct score is one threshold, with
    // prediction rule score >= threshold.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    PrCurve curve;
    std::int64_t tp = 0;
    std::int64_t pred_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            ++pred_pos;
            if (truth[order[i]] != 0) ++tp;
            ++i;
        }
        PrPoint p;
        p.threshold = threshold;
        p.recall = static_cast<double>(tp) / static_cast<double>(positives);
        p.precision = static_cast<double>(tp) / static_cast<double>(pred_pos);
        curve.points.push_back(p);
    }
    double auprc = 0.0;
    double prev_recall = 0.0;
    for (const PrPoint& p : curve.points) {
        auprc += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    curve.auprc = auprc;
    return curve;
}

namespace {

// Reference operating recalls for the summary table; the nearest achieved
// recall at or above the target is reported.
const std::map<BeatLabel, double> kOperatingRecall = {
    {BeatLabel::kS, 0.41},
    {BeatLabel::kV, 0.91},
    {BeatLabel::kF, 0.60},
    {BeatLabel::kN, 0.99},
};

PrPoint operating_point(const PrCurve& curve) {
    const double target = kOperatingRecall.at(curve.class_label);
    for (const PrPoint& p : curve.points) {
        if (p.recall >= target) return p;
    }
    return curve.points.back();
}

}  // namespace

RegimeReport evaluate_regimes(const std::vector<RegimeArtifact>& artifacts,
                              const BeatDataset& test) {
    test.validate();
    RegimeReport report;
    for (const RegimeArtifact& art : artifacts) {
        RegimeReport::Entry entry;
        entry.regime = art.name;
        entry.present = art.model != nullptr;
        if (entry.present) {
            const auto scores = classifier_scores(*art.model, test.beats);
            for (int c = 0; c < kNumClasses; ++c) {
                const auto label = static_cast<BeatLabel>(c);
                std::vector<double> s(test.beats.size());
                std::vector<int> truth(test.beats.size());
                std::int64_t pos = 0;
                for (std::size_t i = 0; i < test.beats.size(); ++i) {
                    s[i] = scores[i][static_cast<std::size_t>(c)];
                    truth[i] = test.beats[i].label == label ? 1 : 0;
                    pos += truth[i];
                }
                if (pos == 0) continue;
                PrCurve curve = pr_curve(s, truth);
                curve.class_label = label;
                entry.curves.push_back(std::move(curve));
            }
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

std::string RegimeReport::summary_text() const {
    std::string out = "regime          class  recall  precision  auprc\n";
    char buf[160];
    for (const Entry& e : entries) {
        if (!e.present) {
            std::snprintf(buf, sizeof(buf), "%-15s (artifact absent)\n", e.regime.c_str());
            out += buf;
            continue;
        }
        for (const PrCurve& c : e.curves) {
            const PrPoint p = operating_point(c);
            std::snprintf(buf, sizeof(buf), "%-15s %c      %.3f   %.3f      %.4f\n",
                          e.regime.c_str(), label_to_char(c.class_label), p.recall,
                          p.precision, c.auprc);
            out += buf;
        }
    }
    return out;
}

void RegimeReport::save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char buf[120];
    for (const Entry& e : entries) {
        for (const PrCurve& c : e.curves) {
            const std::string path =
                (fs::path(dir) / (e.regime + "_" + label_to_char(c.class_label) + ".csv"))
                    .string();
            std::ofstream f(path, std::ios::binary);
            if (!f) throw InputError("cannot open curve file for writing: " + path);
            f << "threshold,recall,precision\n";
            for (const PrPoint& p : c.points) {
                std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold,
                              p.recall, p.precision);
                f << buf;
            }
            if (!f) throw InputError("failed writing curve file: " + path);
        }
    }
    std::ofstream f((fs::path(dir) / "summary.txt").string(), std::ios::binary);
    if (!f) throw InputError("cannot open summary file for writing");
    f << summary_text();
}

}  // namespace cardioforge

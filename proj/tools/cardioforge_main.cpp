// cardioforge: ODE-based heartbeat synthesis, residual-guided GAN training,
// and downstream beat classification, as one reproducible pipeline binary.
//
// Exit codes: 0 success, 1 computation failure, 2 invalid input.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cardioforge/beat_data.hpp"
#include "cardioforge/classifier_eval.hpp"
#include "cardioforge/config.hpp"
#include "cardioforge/dynamical_model.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/param_estimation.hpp"
#include "cardioforge/rng.hpp"
#include "cardioforge/sim_gan.hpp"
#include "cardioforge/version.hpp"

namespace fs = std::filesystem;
using namespace cardioforge;

namespace {

struct CommonArgs {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

class ManifestScope {
  public:
    ManifestScope(const std::string& command, const std::string& out_dir)
        : out_dir_(out_dir), start_(std::chrono::steady_clock::now()) {
        manifest_.command = command;
        manifest_.version = kVersion;
        fs::create_directories(out_dir);
    }

    void input(const std::string& path) { manifest_.inputs.push_back(path); }
    void output(const std::string& path) { manifest_.outputs.push_back(path); }
    void config(const std::string& path) { manifest_.config_path = path; }
    void seed(std::uint64_t s) { manifest_.seed = s; }

    void finish() {
        const auto end = std::chrono::steady_clock::now();
        manifest_.duration_seconds = std::chrono::duration<double>(end - start_).count();
        manifest_.write(out_dir_);
    }

  private:
    RunManifest manifest_;
    std::string out_dir_;
    std::chrono::steady_clock::time_point start_;
};

BeatLabel parse_class_flag(const std::string& value) {
    if (value.size() != 1) {
        throw InputError("class must be one of N, S, V, F; got '" + value + "'");
    }
    return label_from_char(value[0]);
}

std::vector<Heartbeat> filter_class(const BeatDataset& ds, BeatLabel label,
                                    const std::string& beats_path) {
    auto beats = ds.of_class(label);
    if (beats.empty()) {
        throw InputError("no beats of class " + std::string(1, label_to_char(label)) +
                         " in " + beats_path);
    }
    return beats;
}

KvConfig load_config_with_overrides(const std::string& path,
                                    const std::vector<std::string>& overrides) {
    KvConfig kv = path.empty() ? KvConfig{} : KvConfig::load(path);
    for (const std::string& item : overrides) kv.apply_override(item);
    return kv;
}

int cmd_simulate(const CommonArgs& common, const std::string& eta_file,
                 const std::string& class_flag, int count, double noise) {
    ManifestScope scope("simulate", common.out);
    const std::uint64_t seed = resolve_seed(common.seed, nullptr);
    scope.seed(seed);

    EtaDistribution dist;
    if (!eta_file.empty()) {
        dist = EtaDistribution::load(eta_file);
        scope.input(eta_file);
        if (!class_flag.empty() && parse_class_flag(class_flag) != dist.class_label) {
            throw InputError("--class disagrees with the class in " + eta_file);
        }
    } else {
        const BeatLabel label =
            class_flag.empty() ? BeatLabel::kN : parse_class_flag(class_flag);
        dist = EtaDistribution::point(SimulatorParams::defaults(), label);
    }

    BeatDataset ds;
    if (count > 0) {
        ds.beats = simulator_only_generate(dist, count, noise, seed);
    }
    const std::string beats_path = (fs::path(common.out) / "beats.csv").string();
    save_csv(ds, beats_path);
    scope.output(beats_path);
    scope.finish();
    std::printf("simulate: wrote %d beats to %s\n", count, beats_path.c_str());
    return 0;
}

int cmd_fit(const CommonArgs& common, const std::string& beats_path,
            const std::string& class_flag, int budget, bool do_standardize, int threads) {
    ManifestScope scope("fit", common.out);
    scope.input(beats_path);
    const BeatLabel label = parse_class_flag(class_flag);
    BeatDataset ds = load_csv(beats_path, Split::kTrain);
    if (do_standardize) {
        const StandardizeStats stats = standardize(ds, std::nullopt);
        const std::string stats_path = (fs::path(common.out) / "stats.txt").string();
        stats.save(stats_path);
        scope.output(stats_path);
    }
    const std::vector<Heartbeat> beats = filter_class(ds, label, beats_path);
    const SimulatorParams init = SimulatorParams::defaults();

    // Fits are independent; worker threads pull indices and write into
    // preallocated slots, so the result order is fixed.
    std::vector<FitResult> fits(beats.size());
    const int n_threads = std::max(1, threads);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= beats.size()) return;
                try {
                    fits[i] = fit_eta(beats[i], init, budget);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);

    const EtaDistribution dist = build_distribution(fits, label);
    const std::string dist_path = (fs::path(common.out) / "eta_dist.txt").string();
    const std::string fits_path = (fs::path(common.out) / "fits.csv").string();
    dist.save(dist_path);
    save_fit_results_csv(fits, fits_path);
    scope.output(dist_path);
    scope.output(fits_path);
    scope.finish();
    std::printf("fit: %zu beats of class %c -> %s\n", beats.size(), label_to_char(label),
                dist_path.c_str());
    return 0;
}

int cmd_gan_train(const CommonArgs& common, const std::string& config_path,
                  const std::string& beats_path, const std::string& class_flag,
                  const std::string& eta_dist_path, bool do_standardize) {
    ManifestScope scope("gan-train", common.out);
    scope.config(config_path);
    scope.input(beats_path);
    KvConfig kv = load_config_with_overrides(config_path, common.overrides);
    GanConfig config = gan_config_from_kv(kv);
    config.seed = resolve_seed(common.seed, &kv);
    scope.seed(config.seed);

    const BeatLabel label =
        parse_class_flag(!class_flag.empty() ? class_flag : kv.get_str("class", ""));
    BeatDataset ds = load_csv(beats_path, Split::kTrain);
    if (do_standardize) {
        const StandardizeStats stats = standardize(ds, std::nullopt);
        const std::string stats_path = (fs::path(common.out) / "stats.txt").string();
        stats.save(stats_path);
        scope.output(stats_path);
    }
    const std::vector<Heartbeat> beats = filter_class(ds, label, beats_path);

    std::optional<EtaDistribution> dist;
    if (!eta_dist_path.empty()) {
        dist = EtaDistribution::load(eta_dist_path);
        scope.input(eta_dist_path);
        if (dist->class_label != label) {
            throw InputError("eta distribution class does not match --class");
        }
    }

    const std::string diag = (fs::path(common.out) / "diagnostics.ckpt").string();
    const GanTrainOutput out = train_gan(config, beats, dist, diag);
    save_gan_model(out.model, common.out);
    const std::string log_path = (fs::path(common.out) / "training_log.csv").string();
    out.log.save_csv(log_path);
    scope.output((fs::path(common.out) / "params.ckpt").string());
    scope.output(log_path);
    scope.finish();
    std::printf("gan-train: %s on %zu class-%c beats for %d iterations -> %s\n",
                regime_name(config.regime), beats.size(), label_to_char(label),
                config.iterations, common.out.c_str());
    return 0;
}

int cmd_gan_generate(const CommonArgs& common, const std::string& model_dir, int count) {
    ManifestScope scope("gan-generate", common.out);
    scope.input(model_dir);
    const std::uint64_t seed = resolve_seed(common.seed, nullptr);
    scope.seed(seed);
    const GanModel model = load_gan_model(model_dir);
    BeatDataset ds;
    ds.beats = gan_generate(model, count, seed);
    const std::string beats_path = (fs::path(common.out) / "beats.csv").string();
    save_csv(ds, beats_path);
    scope.output(beats_path);
    scope.finish();
    std::printf("gan-generate: %d beats -> %s\n", count, beats_path.c_str());
    return 0;
}

int cmd_classify(const CommonArgs& common, const std::string& config_path,
                 const std::string& train_path, const std::string& synth_path) {
    ManifestScope scope("classify", common.out);
    scope.config(config_path);
    scope.input(train_path);
    KvConfig kv = load_config_with_overrides(config_path, common.overrides);
    ClassifierConfig config = classifier_config_from_kv(kv);
    config.seed = resolve_seed(common.seed, &kv);
    scope.seed(config.seed);

    BeatDataset base = load_csv(train_path, Split::kTrain);
    const StandardizeStats stats = standardize(base, std::nullopt);

    std::optional<std::vector<Heartbeat>> synth;
    if (!synth_path.empty()) {
        scope.input(synth_path);
        // synthetic beats already live in the standardized training scale
        synth = load_csv(synth_path, Split::kTrain).beats;
    }

    const std::string diag = (fs::path(common.out) / "diagnostics.ckpt").string();
    const ClassifierTrainResult result =
        train_classifier(config, base, synth.has_value() ? &*synth : nullptr, diag);
    save_classifier(result.model, common.out);
    stats.save((fs::path(common.out) / "stats.txt").string());
    const std::string log_path = (fs::path(common.out) / "training_log.csv").string();
    result.save_log_csv(log_path);
    scope.output((fs::path(common.out) / "params.ckpt").string());
    scope.output((fs::path(common.out) / "stats.txt").string());
    scope.output(log_path);
    scope.finish();
    std::printf("classify: trained on %zu beats (%zu synthetic) -> %s\n",
                base.beats.size(), synth.has_value() ? synth->size() : std::size_t{0},
                common.out.c_str());
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::vector<std::string>& model_dirs,
             const std::string& test_path) {
    ManifestScope scope("eval", common.out);
    scope.input(test_path);
    const BeatDataset test = load_csv(test_path, Split::kTest);

    RegimeReport report;
    for (const std::string& dir : model_dirs) {
        scope.input(dir);
        std::string name = fs::path(dir).filename().string();
        if (name.empty()) name = fs::path(dir).parent_path().filename().string();
        if (!fs::exists(fs::path(dir) / "params.ckpt")) {
            RegimeReport::Entry absent;
            absent.regime = name;
            report.entries.push_back(absent);
            continue;
        }
        const Classifier model = load_classifier(dir);
        BeatDataset scaled = test;
        const fs::path stats_path = fs::path(dir) / "stats.txt";
        if (fs::exists(stats_path)) {
            // test amplitudes are scaled with the stats persisted at training
            standardize(scaled, StandardizeStats::load(stats_path.string()));
        }
        const RegimeReport single = evaluate_regimes({{name, &model}}, scaled);
        report.entries.push_back(single.entries.front());
    }
    report.save(common.out);
    scope.output((fs::path(common.out) / "summary.txt").string());
    scope.finish();
    std::cout << report.summary_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heartbeat synthesis, residual-guided GANs, and beat classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    CommonArgs common;

    auto add_common = [&common](CLI::App* sub, bool with_overrides = false) {
        sub->add_option("--out", common.out, "output directory")->required();
        sub->add_option("--seed", common.seed,
                        "random seed (falls back to config, then CARDIOFORGE_SEED)");
        if (with_overrides) {
            sub->add_option("--set", common.overrides,
                            "config override key=value (repeatable)");
        }
    };

    std::string eta_file, class_flag;
    int count = 0;
    double noise = 0.05;
    CLI::App* simulate = app.add_subcommand("simulate", "generate beats from the ODE model");
    simulate->add_option("--eta-file", eta_file, "eta distribution file");
    simulate->add_option("--class", class_flag, "beat class when no --eta-file is given");
    simulate->add_option("--count", count, "number of beats")->required();
    simulate->add_option("--noise", noise, "extra parameter noise sigma");
    add_common(simulate);

    std::string beats_path;
    int budget = 2000;
    bool do_standardize = false;
    int threads = 2;
    CLI::App* fit = app.add_subcommand("fit", "fit model parameters to beats of one class");
    fit->add_option("--beats", beats_path, "beat CSV")->required();
    fit->add_option("--class", class_flag, "beat class")->required();
    fit->add_option("--budget", budget, "objective evaluations per restart");
    fit->add_option("--threads", threads, "fit worker threads");
    fit->add_flag("--standardize", do_standardize, "standardize the file before fitting");
    add_common(fit);

    std::string config_path, eta_dist_path;
    CLI::App* gan_train = app.add_subcommand("gan-train", "train a GAN on one beat class");
    gan_train->add_option("--config", config_path, "GAN config file");
    gan_train->add_option("--beats", beats_path, "beat CSV")->required();
    gan_train->add_option("--class", class_flag, "beat class");
    gan_train->add_option("--eta-dist", eta_dist_path,
                          "eta distribution (required for sim/refine regimes)");
    gan_train->add_flag("--standardize", do_standardize,
                        "standardize the file before training");
    add_common(gan_train, true);

    std::string model_dir;
    CLI::App* gan_gen = app.add_subcommand("gan-generate", "sample beats from a trained GAN");
    gan_gen->add_option("--model", model_dir, "model directory")->required();
    gan_gen->add_option("--count", count, "number of beats")->required();
    add_common(gan_gen);

    std::string train_path, synth_path;
    CLI::App* classify = app.add_subcommand("classify", "train the beat classifier");
    classify->add_option("--config", config_path, "classifier config file");
    classify->add_option("--train", train_path, "training beat CSV")->required();
    classify->add_option("--synth", synth_path, "synthetic beats for phase-2 training");
    add_common(classify, true);

    std::vector<std::string> model_dirs;
    std::string test_path;
    CLI::App* eval_cmd = app.add_subcommand("eval", "precision-recall evaluation");
    eval_cmd->add_option("--model", model_dirs, "classifier directory (repeatable)")
        ->required();
    eval_cmd->add_option("--test", test_path, "test beat CSV")->required();
    add_common(eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(common, eta_file, class_flag, count, noise);
        }
        if (fit->parsed()) {
            return cmd_fit(common, beats_path, class_flag, budget, do_standardize, threads);
        }
        if (gan_train->parsed()) {
            return cmd_gan_train(common, config_path, beats_path, class_flag,
                                 eta_dist_path, do_standardize);
        }
        if (gan_gen->parsed()) return cmd_gan_generate(common, model_dir, count);
        if (classify->parsed()) {
            return cmd_classify(common, config_path, train_path, synth_path);
        }
        if (eval_cmd->parsed()) return cmd_eval(common, model_dirs, test_path);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

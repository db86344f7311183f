#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cardioforge/classifier_eval.hpp"
#include "cardioforge/config.hpp"
#include "cardioforge/dynamical_model.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/param_estimation.hpp"
#include "cardioforge/rng.hpp"

using namespace cardioforge;
namespace fs = std::filesystem;

namespace {

ClassifierConfig small_config() {
    ClassifierConfig c;
    c.scale = 0.125;
    c.batch_size = 8;
    c.epochs_phase1 = 5;
    c.epochs_phase2 = 3;
    c.seed = 3;
    return c;
}

Corpus two_class_corpus(int n_each_train, int n_each_test, std::uint64_t seed) {
    const SimulatorParams base = SimulatorParams::defaults();
    SimulatorParams other = base;
    other.a[2] /= 3.0;  // visibly smaller R deflection
    static EtaDistribution dist_n, dist_v;
    dist_n = EtaDistribution::point(base, BeatLabel::kN);
    dist_v = EtaDistribution::point(other, BeatLabel::kV);
    CorpusSpec spec;
    spec.classes.push_back({&dist_n, n_each_train, n_each_test});
    spec.classes.push_back({&dist_v, n_each_train, n_each_test});
    spec.noise_sigma = 0.03;
    spec.seed = seed;
    Corpus corpus = make_synthetic_corpus(spec);
    // training convention: amplitudes standardized with train-split stats
    const StandardizeStats stats = standardize(corpus.train, std::nullopt);
    if (!corpus.test.beats.empty()) standardize(corpus.test, stats);
    return corpus;
}

// Brute force over every distinct threshold, quadratic and obvious.
PrCurve brute_force_pr(const std::vector<double>& scores, const std::vector<int>& truth) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::int64_t positives = 0;
    for (int t : truth) positives += t != 0;
    PrCurve curve;
    for (double th : thresholds) {
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) {
                if (truth[i] != 0)

                    ++tp;
                else
                    ++fp;
            }
        }
        PrPoint p;
        p.threshold = th;
        p.recall = double(tp) / double(positives);
        p.precision = double(tp) / double(tp + fp);
        curve.points.push_back(p);
    }
    double auprc = 0.0, prev = 0.0;
    for (const PrPoint& p : curve.points) {
        auprc += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    curve.auprc = auprc;
    return curve;
}

}  // namespace

TEST_CASE("classifier output shape and softmax normalisation") {
    const Classifier clf = build_classifier(small_config());
    Rng rng(71);
    auto x = Tensor::create({8, 216});
    for (double& v : x->data) v = rng.normal();
    Graph g;
    const TensorPtr probs = clf.forward(g, x, false);
    REQUIRE(probs->shape == std::vector<std::int64_t>({8, 4}));
    for (int i = 0; i < 8; ++i) {
        double row = 0.0;
        for (int c = 0; c < 4; ++c) {
            const double p = probs->data[i * 4 + c];
            CHECK(p >= 0.0);
            row += p;
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("classifier gradient check at eighth scale") {
    ClassifierConfig c = small_config();
    const Classifier clf = build_classifier(c);
    Rng rng(72);
    auto x = Tensor::create({2, 216});
    for (double& v : x->data) v = rng.normal();
    const std::vector<int> labels = {1, 3};
    const auto params = clf.parameters();
    Graph g0;
    const TensorPtr loss0 = nll_loss(g0, clf.forward(g0, x, true), labels);
    zero_grads(params);
    g0.backward(loss0);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.push_back(p->grad);

    const double step = 1e-6;
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        // spot-check a handful of entries per parameter to keep runtime sane;
        // the acceptance suite sweeps every entry
        const std::size_t n = p.data.size();
        for (std::size_t j = 0; j < n; j += std::max<std::size_t>(1, n / 7)) {
            const double keep = p.data[j];
            p.data[j] = keep + step;
            Graph gp;
            const double fp = nll_loss(gp, clf.forward(gp, x, true), labels)->data[0];
            p.data[j] = keep - step;
            Graph gm;
            const double fm = nll_loss(gm, clf.forward(gm, x, true), labels)->data[0];
            p.data[j] = keep;
            const double fd = (fp - fm) / (2 * step);
            const double an = analytic[pi][j];
            worst = std::max(worst,
                             std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-5}));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("two-phase training contracts") {
    const Corpus corpus = two_class_corpus(30, 10, 404);
    ClassifierConfig c = small_config();

    SUBCASE("empty synth pool equals plain training") {
        const std::vector<Heartbeat> empty;
        const ClassifierTrainResult a = train_classifier(c, corpus.train, nullptr);
        const ClassifierTrainResult b = train_classifier(c, corpus.train, &empty);
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].loss == b.log[i].loss);
            CHECK(a.log[i].phase == 1);
        }
        const auto pa = a.model.parameters();
        const auto pb = b.model.parameters();
        for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);
    }
    SUBCASE("same seed gives bit-identical logs") {
        const ClassifierTrainResult a = train_classifier(c, corpus.train, nullptr);
        const ClassifierTrainResult b = train_classifier(c, corpus.train, nullptr);
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].loss == b.log[i].loss);
            CHECK(a.log[i].accuracy == b.log[i].accuracy);
        }
    }
    SUBCASE("phase 2 runs exactly when synthetic beats are supplied") {
        const auto synth = simulator_only_generate(
            EtaDistribution::point(SimulatorParams::defaults(), BeatLabel::kV), 10, 0.05,
            11);
        const ClassifierTrainResult r = train_classifier(c, corpus.train, &synth);
        bool has_phase2 = false;
        for (const auto& row : r.log) has_phase2 = has_phase2 || row.phase == 2;
        CHECK(has_phase2);
    }
    SUBCASE("test split as base is a hard error") {
        BeatDataset bad = corpus.test;
        CHECK_THROWS_AS(train_classifier(c, bad, nullptr), std::invalid_argument);
    }
    SUBCASE("real-sourced beats in the synthetic pool are a hard error") {
        std::vector<Heartbeat> synth = {corpus.train.beats[0]};
        synth[0].record_id = "someone";
        synth[0].source = BeatSource::kReal;
        CHECK_THROWS_AS(train_classifier(c, corpus.train, &synth), std::invalid_argument);
    }
}

TEST_CASE("training learns the separable desk corpus") {
    const Corpus corpus = two_class_corpus(40, 0, 405);
    ClassifierConfig c = small_config();
    c.scale = 0.25;
    c.epochs_phase1 = 30;
    const ClassifierTrainResult r = train_classifier(c, corpus.train, nullptr);
    REQUIRE(!r.log.empty());
    CHECK(r.log.back().accuracy > 0.9);
}

TEST_CASE("pr_curve basics and brute-force equivalence") {
    SUBCASE("perfect separation") {
        const std::vector<double> scores = {0.9, 0.8, 0.7, 0.2, 0.1};
        const std::vector<int> truth = {1, 1, 1, 0, 0};
        const PrCurve c = pr_curve(scores, truth);
        for (const PrPoint& p : c.points) {
            if (p.recall <= 1.0 && p.threshold > 0.5) CHECK(p.precision == 1.0);
        }
        CHECK(c.auprc == doctest::Approx(1.0));
    }
    SUBCASE("all scores equal collapses to a single point at prevalence") {
        const std::vector<double> scores = {0.4, 0.4, 0.4, 0.4};
        const std::vector<int> truth = {1, 0, 0, 0};
        const PrCurve c = pr_curve(scores, truth);
        REQUIRE(c.points.size() == 1);
        CHECK(c.points[0].recall == 1.0);
        CHECK(c.points[0].precision == doctest::Approx(0.25));
        CHECK(c.auprc == doctest::Approx(0.25));
    }
    SUBCASE("twenty-point hand case equals brute force exactly") {
        Rng rng(73);
        std::vector<double> scores(20);
        std::vector<int> truth(20);
        for (int i = 0; i < 20; ++i) {
            scores[i] = rng.uniform(0.0, 1.0);
            truth[i] = rng.below(3) == 0 ? 1 : 0;
        }
        truth[0] = 1;
        const PrCurve a = pr_curve(scores, truth);
        const PrCurve b = brute_force_pr(scores, truth);
        REQUIRE(a.points.size() == b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            CHECK(a.points[i].threshold == b.points[i].threshold);
            CHECK(a.points[i].recall == b.points[i].recall);
            CHECK(a.points[i].precision == b.points[i].precision);
        }
        CHECK(a.auprc == b.auprc);
    }
    SUBCASE("recall is non-decreasing along the sweep") {
        Rng rng(74);
        std::vector<double> scores(50);
        std::vector<int> truth(50);
        for (int i = 0; i < 50; ++i) {
            scores[i] = rng.below(10) * 0.1;  // duplicates on purpose
            truth[i] = rng.below(2) ? 1 : 0;
        }
        truth[7] = 1;
        const PrCurve c = pr_curve(scores, truth);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            CHECK(c.points[i].recall >= c.points[i - 1].recall);
        }
    }
    SUBCASE("no positives is an error") {
        CHECK_THROWS_AS(pr_curve({0.5, 0.2}, {0, 0}), std::invalid_argument);
        CHECK_THROWS_AS(pr_curve({0.5}, {1, 0}), std::invalid_argument);
    }
}

TEST_CASE("regime evaluation report") {
    const Corpus corpus = two_class_corpus(20, 12, 406);
    ClassifierConfig c = small_config();
    c.epochs_phase1 = 3;
    const ClassifierTrainResult trained = train_classifier(c, corpus.train, nullptr);

    SUBCASE("single regime, single positive class gives exactly one curve") {
        BeatDataset only_v;
        only_v.split = Split::kTest;
        for (const auto& b : corpus.test.beats) {
            if (b.label == BeatLabel::kV) only_v.beats.push_back(b);
        }
        const RegimeReport rep =
            evaluate_regimes({{"solo", &trained.model}}, only_v);
        REQUIRE(rep.entries.size() == 1);
        CHECK(rep.entries[0].present);
        CHECK(rep.entries[0].curves.size() == 1);
        CHECK(rep.entries[0].curves[0].class_label == BeatLabel::kV);
    }
    SUBCASE("identical models under two names give identical curves") {
        const RegimeReport rep = evaluate_regimes(
            {{"first", &trained.model}, {"second", &trained.model}}, corpus.test);
        REQUIRE(rep.entries.size() == 2);
        REQUIRE(rep.entries[0].curves.size() == rep.entries[1].curves.size());
        for (std::size_t k = 0; k < rep.entries[0].curves.size(); ++k) {
            CHECK(rep.entries[0].curves[k].auprc == rep.entries[1].curves[k].auprc);
        }
    }
    SUBCASE("missing artifacts are reported absent, not fabricated") {
        const RegimeReport rep = evaluate_regimes(
            {{"trained", &trained.model}, {"missing", nullptr}}, corpus.test);
        CHECK(rep.entries[1].present == false);
        CHECK(rep.entries[1].curves.empty());
        CHECK(rep.summary_text().find("artifact absent") != std::string::npos);
    }
    SUBCASE("report files are written with the pinned schema") {
        const auto dir = fs::temp_directory_path() / "cf_report_test";
        fs::remove_all(dir);
        const RegimeReport rep =
            evaluate_regimes({{"base", &trained.model}}, corpus.test);
        rep.save(dir.string());
        CHECK(fs::exists(dir / "summary.txt"));
        std::ifstream f(dir / "base_V.csv");
        REQUIRE(f.good());
        std::string header;
        std::getline(f, header);
        CHECK(header == "threshold,recall,precision");
        fs::remove_all(dir);
    }
}

TEST_CASE("classifier save/load round trip") {
    const Corpus corpus = two_class_corpus(16, 4, 407);
    ClassifierConfig c = small_config();
    c.epochs_phase1 = 2;
    const ClassifierTrainResult trained = train_classifier(c, corpus.train, nullptr);
    const auto dir = fs::temp_directory_path() / "cf_clf_rt";
    fs::remove_all(dir);
    save_classifier(trained.model, dir.string());
    const Classifier loaded = load_classifier(dir.string());
    const auto sa = classifier_scores(trained.model, corpus.test.beats);
    const auto sb = classifier_scores(loaded, corpus.test.beats);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        for (int k = 0; k < 4; ++k) CHECK(sa[i][k] == sb[i][k]);
    }
    fs::remove_all(dir);
}

TEST_CASE("classifier config validation and kv round trip") {
    ClassifierConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.augment_multiple = 0.4;  // off the grid
    CHECK_THROWS_AS(c.validate(), InputError);
    c.augment_multiple = 1.5;
    const KvConfig kv = classifier_config_to_kv(c);
    const ClassifierConfig r = classifier_config_from_kv(kv);
    CHECK(r.augment_multiple == 1.5);
    CHECK(r.scale == c.scale);
    CHECK(r.batch_size == c.batch_size);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cardioforge/beat_data.hpp"
#include "cardioforge/dynamical_model.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/param_estimation.hpp"
#include "cardioforge/rng.hpp"

using namespace cardioforge;
namespace fs = std::filesystem;

namespace {

Heartbeat make_beat(Rng& rng, BeatLabel label, const std::string& id) {
    Heartbeat hb;
    hb.samples.resize(kBeatLen);
    for (double& v : hb.samples) v = rng.normal();
    hb.label = label;
    hb.record_id = id;
    return hb;
}

}  // namespace

TEST_CASE("labels round trip and unknown symbols are rejected") {
    for (char c : {'N', 'S', 'V', 'F'}) CHECK(label_to_char(label_from_char(c)) == c);
    CHECK_THROWS_AS(label_from_char('Q'), InputError);
    CHECK_THROWS_AS(label_from_char('x'), InputError);
}

TEST_CASE("segmentation windows and boundary handling") {
    SUBCASE("exact fit takes the whole signal") {
        std::vector<double> signal(216);
        for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = double(i);
        const SegmentResult r = segment(signal, {72});
        REQUIRE(r.windows.size() == 1);
        CHECK(r.skipped == 0);
        CHECK(r.windows[0].size() == 216);
        CHECK(r.windows[0].front() == 0.0);
        CHECK(r.windows[0].back() == 215.0);
    }
    SUBCASE("peaks too close to the edge are skipped and counted") {
        std::vector<double> signal(216, 0.0);
        const SegmentResult r = segment(signal, {10, 72, 200});
        CHECK(r.windows.size() == 1);
        CHECK(r.skipped == 2);
    }
    SUBCASE("impulse train: every window has its spike at local index 72") {
        std::vector<double> signal(2000, 0.0);
        std::vector<std::int64_t> peaks;
        for (std::int64_t p = 100; p + 144 < 2000; p += 300) {
            signal[static_cast<std::size_t>(p)] = 1.0;
            peaks.push_back(p);
        }
        const SegmentResult r = segment(signal, peaks);
        REQUIRE(r.windows.size() == peaks.size());
        for (const auto& w : r.windows) {
            const auto it = std::max_element(w.begin(), w.end());
            CHECK(std::distance(w.begin(), it) == 72);
        }
    }
}

TEST_CASE("standardization") {
    Rng rng(51);
    SUBCASE("constant signal is an error") {
        BeatDataset ds;
        Heartbeat hb;
        hb.samples.assign(kBeatLen, 3.0);
        hb.record_id = "r";
        ds.beats.push_back(hb);
        CHECK_THROWS_AS(standardize(ds, std::nullopt), std::invalid_argument);
    }
    SUBCASE("random set lands on zero mean, unit deviation; reapplication is identity") {
        BeatDataset ds;
        for (int i = 0; i < 20; ++i) {
            ds.beats.push_back(make_beat(rng, BeatLabel::kN, "r" + std::to_string(i)));
            for (double& v : ds.beats.back().samples) v = 2.0 + 3.0 * v;
        }
        const StandardizeStats stats = standardize(ds, std::nullopt);
        CHECK(stats.mean != 0.0);
        double sum = 0.0, ss = 0.0;
        std::int64_t n = 0;
        for (const auto& b : ds.beats) {
            for (double v : b.samples) {
                sum += v;
                n++;
            }
        }
        const double mean = sum / double(n);
        for (const auto& b : ds.beats) {
            for (double v : b.samples) ss += (v - mean) * (v - mean);
        }
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt(ss / double(n)) - 1.0) < 1e-10);

        BeatDataset copy = ds;
        const StandardizeStats stats2 = standardize(copy, std::nullopt);
        CHECK(std::abs(stats2.mean) < 1e-10);
        CHECK(std::abs(stats2.stddev - 1.0) < 1e-10);
        for (std::size_t i = 0; i < copy.beats.size(); ++i) {
            for (std::size_t l = 0; l < kBeatLen; ++l) {
                CHECK(copy.beats[i].samples[l] ==
                      doctest::Approx(ds.beats[i].samples[l]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("precomputed stats are applied verbatim (test-split convention)") {
        BeatDataset ds;
        ds.beats.push_back(make_beat(rng, BeatLabel::kN, "a"));
        const StandardizeStats stats{2.0, 4.0};
        BeatDataset orig = ds;
        standardize(ds, stats);
        for (std::size_t l = 0; l < kBeatLen; ++l) {
            CHECK(ds.beats[0].samples[l] ==
                  doctest::Approx((orig.beats[0].samples[l] - 2.0) / 4.0));
        }
    }
    SUBCASE("stats file round trip") {
        const StandardizeStats stats{-0.125, 1.75};
        const auto path = fs::temp_directory_path() / "cf_stats_test.txt";
        stats.save(path.string());
        const StandardizeStats r = StandardizeStats::load(path.string());
        CHECK(r.mean == stats.mean);
        CHECK(r.stddev == stats.stddev);
        fs::remove(path);
    }
}

TEST_CASE("beat CSV: empty file, round trip, fixture, errors") {
    const auto dir = fs::temp_directory_path();
    SUBCASE("empty dataset round trips through a header-only file") {
        BeatDataset ds;
        const auto path = dir / "cf_beats_empty.csv";
        save_csv(ds, path.string());
        const BeatDataset r = load_csv(path.string(), Split::kTrain);
        CHECK(r.beats.empty());
        fs::remove(path);
    }
    SUBCASE("save then load is lossless, sources decoded from record ids") {
        Rng rng(52);
        BeatDataset ds;
        ds.beats.push_back(make_beat(rng, BeatLabel::kN, "101#7"));
        ds.beats.push_back(make_beat(rng, BeatLabel::kV, "gan:V:3"));
        ds.beats.push_back(make_beat(rng, BeatLabel::kS, "sim:S:0"));
        const auto path = dir / "cf_beats_rt.csv";
        save_csv(ds, path.string());
        const BeatDataset r = load_csv(path.string(), Split::kTest);
        REQUIRE(r.beats.size() == 3);
        CHECK(r.split == Split::kTest);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(r.beats[i].samples == ds.beats[i].samples);
            CHECK(r.beats[i].label == ds.beats[i].label);
            CHECK(r.beats[i].record_id == ds.beats[i].record_id);
        }
        CHECK(r.beats[0].source == BeatSource::kReal);
        CHECK(r.beats[1].source == BeatSource::kGan);
        CHECK(r.beats[2].source == BeatSource::kSimulator);
        fs::remove(path);
    }
    SUBCASE("hand-written fixture parses to exact values") {
        const auto path = dir / "cf_beats_fixture.csv";
        {
            std::ofstream f(path);
            f << "label,record_id";
            for (int i = 0; i < kBeatLen; ++i) f << ",s" << i;
            f << "\n";
            f << "V,rec42";
            for (int i = 0; i < kBeatLen; ++i) f << "," << (i == 3 ? "0.5" : "0");
            f << "\n";
        }
        const BeatDataset r = load_csv(path.string(), Split::kTrain);
        REQUIRE(r.beats.size() == 1);
        CHECK(r.beats[0].label == BeatLabel::kV);
        CHECK(r.beats[0].record_id == "rec42");
        CHECK(r.beats[0].samples[3] == 0.5);
        CHECK(r.beats[0].samples[4] == 0.0);
        fs::remove(path);
    }
    SUBCASE("malformed rows are rejected with their line number") {
        const auto path = dir / "cf_beats_bad.csv";
        {
            std::ofstream f(path);
            f << "label,record_id";
            for (int i = 0; i < kBeatLen; ++i) f << ",s" << i;
            f << "\nN,short,1,2,3\n";
        }
        try {
            load_csv(path.string(), Split::kTrain);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
        {
            std::ofstream f(path);
            f << "label,record_id";
            for (int i = 0; i < kBeatLen; ++i) f << ",s" << i;
            f << "\nQ,rec";
            for (int i = 0; i < kBeatLen; ++i) f << ",0";
            f << "\n";
        }
        CHECK_THROWS_AS(load_csv(path.string(), Split::kTrain), InputError);
        fs::remove(path);
    }
}

TEST_CASE("record disjointness between splits is enforced") {
    Rng rng(53);
    BeatDataset train, test;
    train.split = Split::kTrain;
    test.split = Split::kTest;
    train.beats.push_back(make_beat(rng, BeatLabel::kN, "shared"));
    test.beats.push_back(make_beat(rng, BeatLabel::kN, "other"));
    CHECK_NOTHROW(check_record_disjoint(train, test));
    test.beats.push_back(make_beat(rng, BeatLabel::kN, "shared"));
    CHECK_THROWS_AS(check_record_disjoint(train, test), std::invalid_argument);
}

TEST_CASE("synthetic corpus: counts, determinism, stump separability") {
    const SimulatorParams base = SimulatorParams::defaults();
    EtaDistribution dist_n = EtaDistribution::point(base, BeatLabel::kN);

    // second class with a 3x smaller R magnitude
    SimulatorParams small_r = base;
    small_r.a[2] /= 3.0;
    EtaDistribution dist_v = EtaDistribution::point(small_r, BeatLabel::kV);

    CorpusSpec spec;
    spec.classes.push_back({&dist_n, 200, 40});
    spec.classes.push_back({&dist_v, 10, 40});
    spec.noise_sigma = 0.03;
    spec.seed = 99;

    const Corpus corpus = make_synthetic_corpus(spec);
    SUBCASE("class counts match the request") {
        auto counts = corpus.train.class_counts();
        CHECK(counts[BeatLabel::kN] == 200);
        CHECK(counts[BeatLabel::kV] == 10);
        auto test_counts = corpus.test.class_counts();
        CHECK(test_counts[BeatLabel::kN] == 40);
        CHECK(test_counts[BeatLabel::kV] == 40);
        CHECK_NOTHROW(check_record_disjoint(corpus.train, corpus.test));
        corpus.train.validate();
        corpus.test.validate();
    }
    SUBCASE("same seed reproduces the corpus bit for bit") {
        const Corpus again = make_synthetic_corpus(spec);
        REQUIRE(again.train.beats.size() == corpus.train.beats.size());
        for (std::size_t i = 0; i < corpus.train.beats.size(); ++i) {
            CHECK(again.train.beats[i].samples == corpus.train.beats[i].samples);
        }
    }
    SUBCASE("a depth-1 stump on the R amplitude separates the classes") {
        // oracle: the R deflection measured by the steepest upstroke (the
        // baseline wander pollutes the raw window maximum), thresholded at
        // the midpoint of the class means; > 90% by construction
        auto peak = [](const Heartbeat& hb) {
            double best = -1e300;
            for (std::size_t l = 0; l + 1 < hb.samples.size(); ++l) {
                best = std::max(best, hb.samples[l + 1] - hb.samples[l]);
            }
            return best;
        };
        double mean_n = 0.0, mean_v = 0.0;
        std::int64_t cn = 0, cv = 0;
        for (const auto& b : corpus.train.beats) {
            if (b.label == BeatLabel::kN) {
                mean_n += peak(b);
                ++cn;
            } else {
                mean_v += peak(b);
                ++cv;
            }
        }
        mean_n /= double(cn);
        mean_v /= double(cv);
        const double threshold = 0.5 * (mean_n + mean_v);
        std::int64_t correct = 0;
        for (const auto& b : corpus.test.beats) {
            const BeatLabel pred = peak(b) > threshold ? BeatLabel::kN : BeatLabel::kV;
            if (pred == b.label) ++correct;
        }
        CHECK(double(correct) / double(corpus.test.beats.size()) > 0.9);
    }
}

TEST_CASE("heartbeat validation") {
    Heartbeat hb;
    hb.samples.assign(kBeatLen, 0.0);
    CHECK_NOTHROW(hb.validate());
    hb.samples[10] = std::nan("");
    CHECK_THROWS_AS(hb.validate(), std::invalid_argument);
    hb.samples.assign(100, 0.0);
    CHECK_THROWS_AS(hb.validate(), std::invalid_argument);
}

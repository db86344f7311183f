#include "cardioforge/beat_data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string_view>

#include "cardioforge/errors.hpp"
#include "cardioforge/param_estimation.hpp"
#include "cardioforge/rng.hpp"

namespace cardioforge {

char label_to_char(BeatLabel label) {
    switch (label) {
        case BeatLabel::kN: return 'N';
        case BeatLabel::kS: return 'S';
        case BeatLabel::kV: return 'V';
        case BeatLabel::kF: return 'F';
    }
    throw std::invalid_argument("bad beat label");
}

BeatLabel label_from_char(char c) {
    switch (c) {
        case 'N': return BeatLabel::kN;
        case 'S': return BeatLabel::kS;
        case 'V': return BeatLabel::kV;
        case 'F': return BeatLabel::kF;
        default:
            throw InputError(std::string("unknown heartbeat label '") + c +
                             "' (expected N, S, V or F)");
    }
}

void Heartbeat::validate() const {
    if (samples.size() != static_cast<std::size_t>(kBeatLen)) {
        throw std::invalid_argument("heartbeat must have exactly 216 samples");
    }
    for (double v : samples) {
        if (!std::isfinite(v)) throw std::invalid_argument("heartbeat sample not finite");
    }
}

std::map<BeatLabel, std::int64_t> BeatDataset::class_counts() const {
    std::map<BeatLabel, std::int64_t> counts;
    for (const Heartbeat& b : beats) ++counts[b.label];
    return counts;
}

std::vector<Heartbeat> BeatDataset::of_class(BeatLabel label) const {
    std::vector<Heartbeat> out;
    for (const Heartbeat& b : beats) {
        if (b.label == label) out.push_back(b);
    }
    return out;
}

void BeatDataset::validate() const {
    for (const Heartbeat& b : beats) b.validate();
}

void check_record_disjoint(const BeatDataset& train, const BeatDataset& test) {
    std::set<std::string> train_ids;
    for (const Heartbeat& b : train.beats) train_ids.insert(b.record_id);
    for (const Heartbeat& b : test.beats) {
        if (train_ids.count(b.record_id) != 0) {
            throw std::invalid_argument("record_id '" + b.record_id +
                                        "' appears in both train and test splits");
        }
    }
}

SegmentResult segment(const std::vector<double>& signal,
                      const std::vector<std::int64_t>& r_peaks) {
    constexpr std::int64_t kBefore = 72;
    constexpr std::int64_t kAfter = 144;
    SegmentResult out;
    const auto n = static_cast<std::int64_t>(signal.size());
    for (std::int64_t r : r_peaks) {
        if (r - kBefore < 0 || r + kAfter > n) {
            ++out.skipped;
            continue;
        }
        out.windows.emplace_back(signal.begin() + (r - kBefore), signal.begin() + (r + kAfter));
    }
    return out;
}

void StandardizeStats::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open stats file for writing: " + path);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", mean, stddev);
    f << buf;
    if (!f) throw InputError("failed writing stats file: " + path);
}

StandardizeStats StandardizeStats::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open stats file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw InputError("empty stats file: " + path);
    StandardizeStats s;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("malformed stats file: " + path);
    try {
        s.mean = std::stod(line.substr(0, comma));
        s.stddev = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
        throw InputError("malformed stats file: " + path);
    }
    return s;
}

StandardizeStats standardize(BeatDataset& ds,
                             const std::optional<StandardizeStats>& precomputed) {
    StandardizeStats stats;
    if (precomputed.has_value()) {
        stats = *precomputed;
    } else {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const Heartbeat& b : ds.beats) {
            for (double v : b.samples) sum += v;
            n += static_cast<std::int64_t>(b.samples.size());
        }
        if (n == 0) throw std::invalid_argument("standardize: empty dataset");
        stats.mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const Heartbeat& b : ds.beats) {
            for (double v : b.samples) {
                const double d = v - stats.mean;
                ss += d * d;
            }
        }
        stats.stddev = std::sqrt(ss / static_cast<double>(n));
    }
    if (!(stats.stddev > 1e-12)) {
        throw std::invalid_argument("standardize: zero amplitude spread");
    }
    for (Heartbeat& b : ds.beats) {
        for (double& v : b.samples) v = (v - stats.mean) / stats.stddev;
    }
    return stats;
}

void save_csv(const BeatDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open beat file for writing: " + path);
    f << "label,record_id";
    for (int i = 0; i < kBeatLen; ++i) f << ",s" << i;
    f << '\n';
    char buf[40];
    for (const Heartbeat& b : ds.beats) {
        b.validate();
        f << label_to_char(b.label) << ',' << b.record_id;
        for (double v : b.samples) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw InputError("failed writing beat file: " + path);
}

namespace {

BeatSource source_from_record_id(const std::string& id) {
    if (id.rfind("gan:", 0) == 0) return BeatSource::kGan;
    if (id.rfind("sim:", 0) == 0) return BeatSource::kSimulator;
    return BeatSource::kReal;
}

}  // namespace

BeatDataset load_csv(const std::string& path, Split split) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open beat file: " + path);
    BeatDataset ds;
    ds.split = split;
    std::string line;
    if (!std::getline(f, line)) throw InputError("beat file has no header: " + path);
    if (line.rfind("label,record_id", 0) != 0) {
        throw InputError("beat file has an unexpected header: " + path);
    }
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fail = [&](const std::string& why) {
            throw InputError("beat file " + path + " line " + std::to_string(line_no) +
                             ": " + why);
        };
        std::string_view rest(line);
        auto next_field = [&]() -> std::string_view {
            const auto comma = rest.find(',');
            std::string_view field = rest.substr(0, comma);
            rest = comma == std::string_view::npos ? std::string_view{}
                                                   : rest.substr(comma + 1);
            return field;
        };
        const std::string_view label_f = next_field();
        if (label_f.size() != 1) fail("bad label field");
        Heartbeat hb;
        hb.label = label_from_char(label_f[0]);
        hb.record_id = std::string(next_field());
        hb.source = source_from_record_id(hb.record_id);
        hb.samples.reserve(kBeatLen);
        for (int i = 0; i < kBeatLen; ++i) {
            const std::string_view field = next_field();
            if (field.empty()) fail("missing sample s" + std::to_string(i));
            double v = 0.0;
            const auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || p != field.data() + field.size()) {
                fail("bad numeric value in sample s" + std::to_string(i));
            }
            hb.samples.push_back(v);
        }
        if (!rest.empty()) fail("trailing fields after s215");
        try {
            hb.validate();
        } catch (const std::exception& e) {
            fail(e.what());
        }
        ds.beats.push_back(std::move(hb));
    }
    return ds;
}

Corpus make_synthetic_corpus(const CorpusSpec& spec) {
    Corpus corpus;
    corpus.train.split = Split::kTrain;
    corpus.test.split = Split::kTest;
    std::uint64_t stream = 0;
    for (const CorpusClassSpec& cls : spec.classes) {
        if (cls.dist == nullptr) {
            throw std::invalid_argument("make_synthetic_corpus: null class distribution");
        }
        const char label = label_to_char(cls.dist->class_label);
        if (cls.train_count > 0) {
            auto beats = simulator_only_generate(*cls.dist,
                                                 static_cast<int>(cls.train_count),
                                                 spec.noise_sigma,
                                                 Rng::derive(spec.seed, stream));
            for (std::size_t i = 0; i < beats.size(); ++i) {
                beats[i].record_id =
                    std::string("sim:") + label + ":train:" + std::to_string(i);
                corpus.train.beats.push_back(std::move(beats[i]));
            }
        }
        ++stream;
        if (cls.test_count > 0) {
            auto beats = simulator_only_generate(*cls.dist,
                                                 static_cast<int>(cls.test_count),
                                                 spec.noise_sigma,
                                                 Rng::derive(spec.seed, stream));
            for (std::size_t i = 0; i < beats.size(); ++i) {
                beats[i].record_id =
                    std::string("sim:") + label + ":test:" + std::to_string(i);
                corpus.test.beats.push_back(std::move(beats[i]));
            }
        }
        ++stream;
    }
    check_record_disjoint(corpus.train, corpus.test);
    return corpus;
}

}  // namespace cardioforge

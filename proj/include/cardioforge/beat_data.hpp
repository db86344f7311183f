#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cardioforge {

inline constexpr int kBeatLen = 216;

enum class BeatLabel { kN = 0, kS = 1, kV = 2, kF = 3 };
inline constexpr int kNumClasses = 4;

char label_to_char(BeatLabel label);
/// Throws InputError on anything outside {N, S, V, F}.
BeatLabel label_from_char(char c);

enum class BeatSource { kReal, kGan, kSimulator };

/// One fixed-length beat window. record_id encodes provenance: ids starting
/// with "gan:" or "sim:" mark synthetic beats; everything else is real.
struct Heartbeat {
    std::vector<double> samples;  // exactly kBeatLen finite values
    BeatLabel label = BeatLabel::kN;
    BeatSource source = BeatSource::kReal;
    std::string record_id;

    /// Throws std::invalid_argument on violated invariants.
    void validate() const;
};

enum class Split { kTrain, kTest };

struct BeatDataset {
    std::vector<Heartbeat> beats;
    Split split = Split::kTrain;

    std::map<BeatLabel, std::int64_t> class_counts() const;
    std::vector<Heartbeat> of_class(BeatLabel label) const;
    void validate() const;
};

/// Throws std::invalid_argument if the two splits share any record_id.
void check_record_disjoint(const BeatDataset& train, const BeatDataset& test);

struct SegmentResult {
    std::vector<std::vector<double>> windows;  // each exactly kBeatLen samples
    std::size_t skipped = 0;                   // beats too close to a boundary
};

/// Cut [r-72, r+144) windows around each annotated R-peak sample index.
/// Peaks without 72 samples of margin before or 144 after are skipped.
SegmentResult segment(const std::vector<double>& signal,
                      const std::vector<std::int64_t>& r_peaks);

struct StandardizeStats {
    double mean = 0.0;
    double stddev = 1.0;

    void save(const std::string& path) const;
    static StandardizeStats load(const std::string& path);
};

/// Shift/scale every sample by the given stats, or by stats computed over
/// this dataset when none are given (train-split convention). Returns the
/// stats used. Throws std::invalid_argument on (near-)zero spread.
StandardizeStats standardize(BeatDataset& ds,
                             const std::optional<StandardizeStats>& precomputed);

/// Beat CSV, header "label,record_id,s0,...,s215", one beat per row,
/// 17 significant digits. Round trips losslessly.
void save_csv(const BeatDataset& ds, const std::string& path);
BeatDataset load_csv(const std::string& path, Split split);

struct EtaDistribution;

struct CorpusClassSpec {
    EtaDistribution const* dist;  // per-class eta distribution
    std::int64_t train_count = 0;
    std::int64_t test_count = 0;
};

struct CorpusSpec {
    std::vector<CorpusClassSpec> classes;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
};

struct Corpus {
    BeatDataset train;
    BeatDataset test;
};

/// Simulator-backed stand-in corpus with disjoint pseudo record ids
/// between the splits.
Corpus make_synthetic_corpus(const CorpusSpec& spec);

}  // namespace cardioforge

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cardioforge {

/// Flat key-value config: "key = value" lines, '#' comments. Keys mirror the
/// config struct field names; flags override file values.
struct KvConfig {
    std::map<std::string, std::string> values;

    static KvConfig load(const std::string& path);
    static KvConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);

    /// Apply one "key=value" override string.
    void apply_override(const std::string& item);

    /// Deterministic (sorted) serialisation.
    std::string serialize() const;
    void save(const std::string& path) const;
};

/// Seed precedence: explicit flag, then config value, then CARDIOFORGE_SEED,
/// then zero.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           const KvConfig* config);

/// Run metadata written once per artifact directory. The wall-clock field is
/// the only content that varies between identical reruns.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string version;
    double duration_seconds = 0.0;

    /// Atomic write (temp file + rename) of <dir>/manifest.txt.
    void write(const std::string& dir) const;
};

}  // namespace cardioforge

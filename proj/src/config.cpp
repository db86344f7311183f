#include "cardioforge/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cardioforge/errors.hpp"

namespace cardioforge {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return from_string(ss.str());
    } catch (const InputError& e) {
        throw InputError(std::string(e.what()) + " in " + path);
    }
}

KvConfig KvConfig::from_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("malformed config line " + std::to_string(line_no) +
                             " (expected key = value)");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw InputError("empty key on config line " + std::to_string(line_no));
        }
        cfg.values[key] = value;
    }
    return cfg;
}

bool KvConfig::has(const std::string& key) const { return values.count(key) != 0; }

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "' is not a number: " + it->second);
    }
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "' is not an integer: " + it->second);
    }
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "' is not an unsigned integer: " +
                         it->second);
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config key '" + key + "' is not a boolean: " + v);
}

void KvConfig::set(const std::string& key, const std::string& value) {
    values[key] = value;
}

void KvConfig::set_double(const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    values[key] = buf;
}

void KvConfig::set_int(const std::string& key, std::int64_t value) {
    values[key] = std::to_string(value);
}

void KvConfig::apply_override(const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw InputError("override must look like key=value: " + item);
    }
    values[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : values) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

void KvConfig::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open config file for writing: " + path);
    f << serialize();
    if (!f) throw InputError("failed writing config file: " + path);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           const KvConfig* config) {
    if (flag_seed.has_value()) return *flag_seed;
    if (config != nullptr && config->has("seed")) return config->get_u64("seed", 0);
    if (const char* env = std::getenv("CARDIOFORGE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw InputError(std::string("CARDIOFORGE_SEED is not an integer: ") + env);
        }
    }
    return 0;
}

void RunManifest::write(const std::string& dir) const {
    namespace fs = std::filesystem;
    KvConfig kv;
    kv.set("command", command);
    kv.set("config", config_path);
    kv.values["seed"] = std::to_string(seed);
    std::string in_join, out_join;
    for (const std::string& s : inputs) {
        if (!in_join.empty()) in_join += ';';
        in_join += s;
    }
    for (const std::string& s : outputs) {
        if (!out_join.empty()) out_join += ';';
        out_join += s;
    }
    kv.set("inputs", in_join);
    kv.set("outputs", out_join);
    kv.set("version", version);
    kv.set_double("duration_seconds", duration_seconds);
    const fs::path tmp = fs::path(dir) / ".manifest.tmp";
    const fs::path final_path = fs::path(dir) / "manifest.txt";
    kv.save(tmp.string());
    fs::rename(tmp, final_path);
}

}  // namespace cardioforge

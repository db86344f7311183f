#include "cardioforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "cardioforge/errors.hpp"

namespace cardioforge {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'C', 'K', 'P', 'T', '\0', 1};

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& entries) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    put_u32(f, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
        put_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<std::uint32_t>(tensor->shape.size()));
        for (std::int64_t d : tensor->shape) put_u64(f, static_cast<std::uint64_t>(d));
        for (double v : tensor->data) put_f64(f, v);
    }
    if (!f) throw InputError("failed writing checkpoint: " + path);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, 7) != 0) {
        throw InputError("not a parameter checkpoint: " + path);
    }
    if (magic[7] != 1) {
        throw InputError("unsupported checkpoint version in " + path);
    }
    const std::uint32_t count = get_u32(f);
    std::vector<CheckpointEntry> out;
    out.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        CheckpointEntry e;
        const std::uint32_t name_len = get_u32(f);
        e.name.resize(name_len);
        f.read(e.name.data(), name_len);
        const std::uint32_t ndim = get_u32(f);
        std::uint64_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint64_t dim = get_u64(f);
            e.shape.push_back(static_cast<std::int64_t>(dim));
            numel *= dim;
        }
        if (!f || numel > (1ull << 32)) {
            throw InputError("corrupt checkpoint record in " + path);
        }
        e.data.resize(numel);
        for (std::uint64_t i = 0; i < numel; ++i) e.data[i] = get_f64(f);
        if (!f) throw InputError("truncated checkpoint: " + path);
        out.push_back(std::move(e));
    }
    return out;
}

void restore_checkpoint(const std::string& path, const NamedTensors& entries) {
    const auto loaded = load_checkpoint(path);
    std::map<std::string, const CheckpointEntry*> by_name;
    for (const CheckpointEntry& e : loaded) by_name[e.name] = &e;
    for (const auto& [name, tensor] : entries) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw InputError("checkpoint " + path + " is missing tensor '" + name + "'");
        }
        const CheckpointEntry& e = *it->second;
        if (e.shape != tensor->shape) {
            throw InputError("checkpoint tensor '" + name + "' has mismatched shape in " +
                             path);
        }
        tensor->data = e.data;
    }
}

}  // namespace cardioforge

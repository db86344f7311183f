#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardioforge/nn.hpp"

namespace cardioforge {

/// Parameter checkpoints are flat binary files:
///   8-byte magic "CFCKPT\0" + version byte (1), u32 record count, then per
///   record: u32 name length, name bytes, u32 ndim, u64 dims, f64 data.
/// All integers and doubles are little-endian regardless of host order.

struct CheckpointEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<double> data;
};

void save_checkpoint(const std::string& path, const NamedTensors& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

/// Load and copy into existing tensors; names and shapes must match exactly.
void restore_checkpoint(const std::string& path, const NamedTensors& entries);

}  // namespace cardioforge

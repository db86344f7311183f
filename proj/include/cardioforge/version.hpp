#pragma once

namespace cardioforge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cardioforge

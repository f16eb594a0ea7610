#pragma once

namespace fpforge {

inline constexpr const char* kToolName = "fpforge";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace fpforge

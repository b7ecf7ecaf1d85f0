#pragma once

namespace marketrank {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "marketrank";

}  // namespace marketrank

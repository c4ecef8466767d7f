#pragma once

namespace bdlab {

inline constexpr const char* kToolName = "bdlab";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace bdlab

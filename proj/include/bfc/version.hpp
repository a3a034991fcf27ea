#pragma once

namespace bfc {

inline constexpr const char* kToolName = "bfc-lab";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace bfc

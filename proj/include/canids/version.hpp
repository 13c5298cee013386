#pragma once

namespace canids {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace canids

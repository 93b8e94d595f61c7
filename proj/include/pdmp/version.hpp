#pragma once

namespace pdmp {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace pdmp

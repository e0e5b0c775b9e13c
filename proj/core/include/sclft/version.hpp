#pragma once

namespace sclft {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sclft

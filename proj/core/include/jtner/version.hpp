#pragma once

namespace jtner {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace jtner

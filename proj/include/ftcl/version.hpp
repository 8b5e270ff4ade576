#pragma once

namespace ftcl {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ftcl

#pragma once

namespace timedit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace timedit

#pragma once

namespace exclusim {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace exclusim

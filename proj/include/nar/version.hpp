#pragma once

namespace nar {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace nar

#pragma once

namespace d2i {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace d2i

#pragma once

namespace drlfm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace drlfm

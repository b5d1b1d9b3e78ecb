#pragma once

namespace shiftscope {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace shiftscope

#pragma once

namespace fieldreg {

inline constexpr const char* version = "0.1.0";

}  // namespace fieldreg

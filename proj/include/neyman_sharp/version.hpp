#pragma once

namespace neyman_sharp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace neyman_sharp

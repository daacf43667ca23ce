#pragma once

namespace leris
{

inline constexpr const char* kVersion = "0.1.0";

} // namespace leris

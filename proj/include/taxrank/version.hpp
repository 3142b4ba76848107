#pragma once

#include <string_view>

namespace taxrank {

inline constexpr std::string_view kToolName = "taxrank";
inline constexpr std::string_view kToolVersion = "0.1.0";

} // namespace taxrank

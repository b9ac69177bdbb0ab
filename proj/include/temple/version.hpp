#pragma once

#include <string>

namespace temple {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kPipelineName = "temple-forge";

inline std::string pipeline_version() { return std::string(kPipelineName) + " " + kVersion; }

}  // namespace temple

#pragma once

namespace fkp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fkp

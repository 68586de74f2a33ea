#pragma once

namespace l2pfs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace l2pfs

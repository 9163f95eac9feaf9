#pragma once

namespace liefpf {

/// Version string embedded into every result file header.
inline constexpr const char* kVersion = "liefpf 0.1.0";

}  // namespace liefpf

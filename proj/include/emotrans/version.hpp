#pragma once

namespace emotrans {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the checkpoint or SSML dialect layout changes.
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kSsmlDialectVersion = 1;

}  // namespace emotrans

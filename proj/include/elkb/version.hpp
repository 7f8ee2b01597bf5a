#pragma once

namespace elkb {

inline constexpr const char* kVersion = "1.0.0";

// On-disk format versions. Bump on any layout change.
inline constexpr unsigned kKbFormatVersion = 1;
inline constexpr unsigned kIndexFormatVersion = 1;

// Analyzer tag baked into serialized indexes; load refuses a mismatch.
inline constexpr const char* kAnalyzerTag = "elkb.an.1";

}  // namespace elkb

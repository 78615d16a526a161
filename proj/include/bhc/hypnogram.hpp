#pragma once

#include "bhc/types.hpp"

#include <string>
#include <string_view>

namespace bhc::io {

/// Parse a hypnogram from either the canonical CSV ("epoch_index,stage_code",
/// header row optional) or an EDF+ annotation stream carrying sleep-stage
/// labels. Unknown stage labels/codes map to Unscored with a warning.
Hypnogram parse_hypnogram(std::string_view bytes, double epoch_len_s);

Hypnogram parse_hypnogram_file(const std::string& path, double epoch_len_s);

/// Canonical CSV serialization; parse(format(h)) == h.
std::string format_hypnogram(const Hypnogram& h);

} // namespace bhc::io

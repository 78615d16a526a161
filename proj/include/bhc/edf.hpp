#pragma once

#include "bhc/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bhc::io {

/// Parse an EDF / EDF+C byte stream into a Recording (no hypnogram).
/// Digital samples are converted to physical units with the per-signal
/// EDF calibration. Annotation signals ("EDF Annotations") are not
/// returned as channels. EDF+D (discontinuous) files are rejected.
Recording parse_edf(std::string_view bytes);

Recording parse_edf_file(const std::string& path);

/// Serialize channels as EDF with 1-second data records. Channel sample
/// rates must therefore be integral. Digital range is the full 16-bit
/// span; the physical range is taken from each channel's actual extrema
/// exactly as they will be printed into the 8-char ASCII header fields,
/// so a write-then-parse round trip is exact to one quantization step.
std::string write_edf(const Recording& rec);

void write_edf_file(const Recording& rec, const std::string& path);

/// Raw annotation entries of an EDF+ file (onset/duration in seconds).
struct EdfAnnotation {
    double onset_s = 0.0;
    double duration_s = 0.0;
    std::string text;
};

std::vector<EdfAnnotation> parse_edf_annotations(std::string_view bytes);

} // namespace bhc::io

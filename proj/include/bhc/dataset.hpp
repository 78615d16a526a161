#pragma once

#include "bhc/types.hpp"

#include <string>
#include <vector>

namespace bhc::io {

/// One line of the dataset manifest CSV
/// "subject_id,edf_path,hypnogram_path,exclude".
struct ManifestEntry {
    std::string subject_id;
    std::string edf_path;
    std::string hypnogram_path;
    bool exclude = false;
};

/// Paths are resolved relative to the manifest's directory.
std::vector<ManifestEntry> parse_manifest(const std::string& manifest_path);

struct DatasetLoadResult {
    std::vector<Recording> recordings;
    std::vector<std::pair<std::string, std::string>> skipped; // (subject, reason)
    std::vector<std::pair<std::string, std::string>> errors;  // (subject, message)
};

/// Loads every non-excluded subject; per-subject failures are collected
/// rather than aborting the batch. Recordings are validated and carry
/// their hypnograms.
DatasetLoadResult load_dataset(const std::string& manifest_path, double epoch_len_s = 30.0);

} // namespace bhc::io

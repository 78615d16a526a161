#include "bhc/dataset.hpp"

#include "bhc/csv.hpp"
#include "bhc/edf.hpp"
#include "bhc/error.hpp"
#include "bhc/hypnogram.hpp"
#include "bhc/log.hpp"

#include <filesystem>

namespace bhc::io {

namespace fs = std::filesystem;

std::vector<ManifestEntry> parse_manifest(const std::string& manifest_path) {
    const auto rows = csv::read_file(manifest_path);
    if (rows.empty()) throw ParseError("manifest is empty: " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::vector<ManifestEntry> out;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i == 0 && !r.empty() && r[0] == "subject_id") continue; // header
        if (r.size() < 3)
            throw ParseError(log::cat("manifest line ", i + 1, ": expected at least 3 columns"));
        ManifestEntry e;
        e.subject_id = r[0];
        e.edf_path = resolve(r[1]);
        e.hypnogram_path = resolve(r[2]);
        if (r.size() >= 4) {
            std::string v = r[3];
            for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            e.exclude = (v == "1" || v == "true" || v == "yes" || v == "x");
        }
        if (e.subject_id.empty())
            throw ParseError(log::cat("manifest line ", i + 1, ": empty subject_id"));
        out.push_back(std::move(e));
    }
    if (out.empty()) throw ParseError("manifest has no entries: " + manifest_path);
    return out;
}

DatasetLoadResult load_dataset(const std::string& manifest_path, double epoch_len_s) {
    DatasetLoadResult result;
    for (const auto& e : parse_manifest(manifest_path)) {
        if (e.exclude) {
            log::info("skipping excluded subject " + e.subject_id);
            result.skipped.emplace_back(e.subject_id, "excluded by manifest");
            continue;
        }
        try {
            Recording rec = parse_edf_file(e.edf_path);
            rec.subject_id = e.subject_id;
            rec.hypnogram = parse_hypnogram_file(e.hypnogram_path, epoch_len_s);
            validate_recording(rec);
            result.recordings.push_back(std::move(rec));
        } catch (const Error& err) {
            log::warn(log::cat("subject ", e.subject_id, " failed to load: ", err.what()));
            result.errors.emplace_back(e.subject_id, err.what());
        }
    }
    return result;
}

} // namespace bhc::io

#include "bhc/hypnogram.hpp"

#include "bhc/csv.hpp"
#include "bhc/edf.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bhc::io {

namespace {

bool looks_like_edf(std::string_view bytes) {
    return bytes.size() >= 8 && csv::trim(bytes.substr(0, 8)) == "0";
}

SleepStage stage_from_label(const std::string& raw) {
    std::string s;
    for (char c : raw) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s.find("sleep stage") == std::string::npos && s.find("stage") == std::string::npos)
        return SleepStage::Unscored;
    if (s.find("w") != std::string::npos && s.find("n") == std::string::npos) return SleepStage::Wake;
    if (s.find("n1") != std::string::npos || s.find("stage 1") != std::string::npos) return SleepStage::N1;
    if (s.find("n2") != std::string::npos || s.find("stage 2") != std::string::npos) return SleepStage::N2;
    if (s.find("n3") != std::string::npos || s.find("stage 3") != std::string::npos ||
        s.find("stage 4") != std::string::npos)
        return SleepStage::N3;
    if (s.find("r") != std::string::npos) return SleepStage::Rem;
    return SleepStage::Unscored;
}

Hypnogram parse_csv_hypnogram(std::string_view bytes, double epoch_len_s) {
    Hypnogram h;
    h.epoch_len_s = epoch_len_s;

    std::vector<std::pair<long, int>> entries;
    size_t start = 0;
    size_t line_no = 0;
    while (start <= bytes.size()) {
        size_t end = bytes.find('\n', start);
        if (end == std::string_view::npos) end = bytes.size();
        std::string line = csv::trim(bytes.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty()) {
            if (end == bytes.size()) break;
            continue;
        }
        const auto fields = csv::split(line);
        if (fields.size() < 2)
            throw ParseError(log::cat("hypnogram CSV line ", line_no, ": expected 2 columns"));
        if (line_no == 1 && !std::isdigit(static_cast<unsigned char>(fields[0][0])) &&
            fields[0][0] != '-')
            continue; // header row
        const long idx = csv::to_int(fields[0], log::cat("hypnogram line ", line_no, " epoch index"));
        int code;
        try {
            code = static_cast<int>(csv::to_int(fields[1], "stage code"));
        } catch (const ParseError&) {
            code = -1; // non-numeric label -> Unscored below
        }
        entries.emplace_back(idx, code);
        if (end == bytes.size()) break;
    }
    if (entries.empty()) throw ParseError("hypnogram CSV: no stage entries");

    long prev = -1;
    for (const auto& [idx, code] : entries) {
        if (idx <= prev)
            throw ParseError(log::cat("hypnogram CSV: epoch indices not strictly increasing at ", idx));
        while (prev + 1 < idx) {
            h.stages.push_back(SleepStage::Unscored);
            ++prev;
        }
        const SleepStage st = stage_from_code(code);
        if (st == SleepStage::Unscored && code != 5)
            log::warn(log::cat("hypnogram: unknown stage code ", code, " at epoch ", idx,
                               " mapped to Unscored"));
        h.stages.push_back(st);
        prev = idx;
    }
    return h;
}

Hypnogram parse_edf_hypnogram(std::string_view bytes, double epoch_len_s) {
    const auto annots = parse_edf_annotations(bytes);
    Hypnogram h;
    h.epoch_len_s = epoch_len_s;
    for (const auto& a : annots) {
        const SleepStage st = stage_from_label(a.text);
        if (st == SleepStage::Unscored && a.text.find("tage") == std::string::npos)
            continue; // timestamp or unrelated annotation
        const long first = static_cast<long>(std::llround(a.onset_s / epoch_len_s));
        const long count =
            std::max<long>(1, static_cast<long>(std::llround(std::max(a.duration_s, epoch_len_s) / epoch_len_s)));
        if (static_cast<size_t>(first + count) > h.stages.size())
            h.stages.resize(static_cast<size_t>(first + count), SleepStage::Unscored);
        for (long e = first; e < first + count; ++e) h.stages[static_cast<size_t>(e)] = st;
    }
    if (h.stages.empty()) throw ParseError("EDF+ hypnogram: no sleep-stage annotations found");
    return h;
}

} // namespace

Hypnogram parse_hypnogram(std::string_view bytes, double epoch_len_s) {
    if (bytes.empty()) throw ParseError("hypnogram: empty input");
    if (epoch_len_s <= 0) throw ValidationError("hypnogram: epoch length must be positive");
    if (looks_like_edf(bytes)) return parse_edf_hypnogram(bytes, epoch_len_s);
    return parse_csv_hypnogram(bytes, epoch_len_s);
}

Hypnogram parse_hypnogram_file(const std::string& path, double epoch_len_s) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open hypnogram file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_hypnogram(bytes, epoch_len_s);
}

std::string format_hypnogram(const Hypnogram& h) {
    std::string out = "epoch_index,stage_code\n";
    for (size_t i = 0; i < h.stages.size(); ++i) {
        out += csv::fmt(static_cast<std::int64_t>(i));
        out += ',';
        out += csv::fmt(static_cast<std::int64_t>(stage_code(h.stages[i])));
        out += '\n';
    }
    return out;
}

} // namespace bhc::io

#include "bhc/edf.hpp"

#include "bhc/csv.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace bhc::io {

namespace {

constexpr size_t kHeaderBytes = 256;
constexpr size_t kPerSignalBytes = 256;

std::string field_str(std::string_view bytes, size_t offset, size_t len) {
    if (offset + len > bytes.size())
        throw ParseError(log::cat("EDF truncated: header field at byte ", offset, " extends past end"));
    return csv::trim(bytes.substr(offset, len));
}

double field_num(std::string_view bytes, size_t offset, size_t len, const char* name) {
    const std::string s = field_str(bytes, offset, len);
    if (s.empty())
        throw ParseError(log::cat("EDF header field '", name, "' at byte ", offset, " is empty"));
    try {
        return csv::to_double(s, name);
    } catch (const ParseError&) {
        throw ParseError(log::cat("EDF header field '", name, "' at byte ", offset,
                                  " is not numeric: '", s, "'"));
    }
}

long field_int(std::string_view bytes, size_t offset, size_t len, const char* name) {
    const double v = field_num(bytes, offset, len, name);
    if (v != std::floor(v))
        throw ParseError(log::cat("EDF header field '", name, "' at byte ", offset,
                                  " is not an integer"));
    return static_cast<long>(v);
}

bool is_annotation_label(const std::string& label) {
    return label.find("EDF Annotations") != std::string::npos;
}

struct SignalHeader {
    std::string label;
    double phys_min = 0, phys_max = 0;
    long dig_min = 0, dig_max = 0;
    long samples_per_record = 0;
};

struct ParsedHeader {
    std::string patient;
    std::string reserved;
    long n_records = 0;
    double record_duration_s = 0;
    std::vector<SignalHeader> signals;
    size_t data_offset = 0;
};

ParsedHeader parse_header(std::string_view bytes) {
    if (bytes.size() < kHeaderBytes)
        throw ParseError(log::cat("EDF too short: ", bytes.size(), " bytes, header needs 256"));
    const std::string version = field_str(bytes, 0, 8);
    if (version != "0")
        throw ParseError("EDF header field 'version' at byte 0 must be '0', got '" + version + "'");

    ParsedHeader h;
    h.patient = field_str(bytes, 8, 80);
    h.reserved = field_str(bytes, 192, 44);
    if (h.reserved.rfind("EDF+D", 0) == 0)
        throw ParseError("EDF+D (discontinuous) recordings are not supported; only EDF and EDF+C");

    const long header_bytes = field_int(bytes, 184, 8, "header_bytes");
    h.n_records = field_int(bytes, 236, 8, "n_records");
    h.record_duration_s = field_num(bytes, 244, 8, "record_duration");
    const long ns = field_int(bytes, 252, 4, "n_signals");
    if (ns <= 0) throw ParseError("EDF header field 'n_signals' at byte 252 must be positive");
    if (h.n_records < 0) throw ParseError("EDF header field 'n_records' at byte 236 must be >= 0");
    if (h.record_duration_s < 0)
        throw ParseError("EDF header field 'record_duration' at byte 244 must be >= 0");

    const size_t expect_header = kHeaderBytes + static_cast<size_t>(ns) * kPerSignalBytes;
    if (static_cast<size_t>(header_bytes) != expect_header)
        log::debug(log::cat("EDF header_bytes field says ", header_bytes, ", expected ", expect_header));
    if (bytes.size() < expect_header)
        throw ParseError(log::cat("EDF truncated: signal headers need ", expect_header,
                                  " bytes, file has ", bytes.size()));

    const size_t n = static_cast<size_t>(ns);
    h.signals.resize(n);
    size_t off = kHeaderBytes;
    for (size_t i = 0; i < n; ++i) h.signals[i].label = field_str(bytes, off + i * 16, 16);
    off += n * 16;  // label
    off += n * 80;  // transducer
    off += n * 8;   // physical dimension
    for (size_t i = 0; i < n; ++i)
        h.signals[i].phys_min = field_num(bytes, off + i * 8, 8, "phys_min");
    off += n * 8;
    for (size_t i = 0; i < n; ++i)
        h.signals[i].phys_max = field_num(bytes, off + i * 8, 8, "phys_max");
    off += n * 8;
    for (size_t i = 0; i < n; ++i)
        h.signals[i].dig_min = field_int(bytes, off + i * 8, 8, "dig_min");
    off += n * 8;
    for (size_t i = 0; i < n; ++i)
        h.signals[i].dig_max = field_int(bytes, off + i * 8, 8, "dig_max");
    off += n * 8;
    off += n * 80;  // prefiltering
    for (size_t i = 0; i < n; ++i) {
        h.signals[i].samples_per_record = field_int(bytes, off + i * 8, 8, "samples_per_record");
        if (h.signals[i].samples_per_record <= 0)
            throw ParseError(log::cat("EDF signal ", i, ": samples_per_record must be positive"));
    }
    off += n * 8;
    off += n * 32;  // reserved
    h.data_offset = off;
    return h;
}

} // namespace

Recording parse_edf(std::string_view bytes) {
    const ParsedHeader h = parse_header(bytes);

    size_t record_samples = 0;
    for (const auto& s : h.signals) record_samples += static_cast<size_t>(s.samples_per_record);
    const size_t record_bytes = record_samples * 2;

    Recording rec;
    rec.subject_id = h.patient.empty() ? "" : csv::split(h.patient.substr(0, h.patient.find(' ')))[0];

    std::vector<size_t> keep;
    for (size_t i = 0; i < h.signals.size(); ++i) {
        const auto& s = h.signals[i];
        if (is_annotation_label(s.label)) continue;
        if (s.dig_max == s.dig_min)
            throw ParseError(log::cat("EDF signal ", i, " ('", s.label,
                                      "'): dig_min == dig_max, calibration undefined"));
        keep.push_back(i);
        ChannelSignal ch;
        ch.label = s.label;
        ch.sample_rate_hz = h.record_duration_s > 0
                                ? static_cast<double>(s.samples_per_record) / h.record_duration_s
                                : 0.0;
        ch.samples.reserve(static_cast<size_t>(h.n_records) * static_cast<size_t>(s.samples_per_record));
        rec.channels.push_back(std::move(ch));
    }
    if (rec.channels.empty()) throw ParseError("EDF contains no data signals");

    size_t pos = h.data_offset;
    for (long r = 0; r < h.n_records; ++r) {
        if (pos + record_bytes > bytes.size())
            throw ParseError(log::cat("EDF truncated in data record ", r, ": need ", record_bytes,
                                      " bytes at offset ", pos, ", file has ", bytes.size()));
        size_t ch_idx = 0;
        size_t sig_pos = pos;
        for (size_t i = 0; i < h.signals.size(); ++i) {
            const auto& s = h.signals[i];
            const size_t nsamp = static_cast<size_t>(s.samples_per_record);
            const bool kept = ch_idx < keep.size() && keep[ch_idx] == i;
            if (kept) {
                auto& ch = rec.channels[ch_idx];
                const double gain = (s.phys_max - s.phys_min) /
                                    static_cast<double>(s.dig_max - s.dig_min);
                const double offset = s.phys_min - gain * static_cast<double>(s.dig_min);
                for (size_t k = 0; k < nsamp; ++k) {
                    const auto lo = static_cast<unsigned char>(bytes[sig_pos + 2 * k]);
                    const auto hi = static_cast<unsigned char>(bytes[sig_pos + 2 * k + 1]);
                    const auto dig = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo) |
                                                               (static_cast<std::uint16_t>(hi) << 8));
                    ch.samples.push_back(static_cast<double>(dig) * gain + offset);
                }
                ++ch_idx;
            }
            sig_pos += nsamp * 2;
        }
        pos += record_bytes;
    }
    return rec;
}

Recording parse_edf_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open EDF file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_edf(bytes);
}

namespace {

void put_field(std::string& out, const std::string& v, size_t len) {
    std::string s = v.substr(0, len);
    s.resize(len, ' ');
    out += s;
}

std::string num_field(double v, size_t len) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*g", static_cast<int>(len - 2), v);
    std::string s(buf);
    if (s.size() > len) {
        std::snprintf(buf, sizeof(buf), "%.*g", 3, v);
        s = buf;
    }
    return s;
}

} // namespace

std::string write_edf(const Recording& rec) {
    if (rec.channels.empty()) throw ValidationError("write_edf: no channels");
    const double record_dur = 1.0;
    long n_records = 0;
    for (const auto& ch : rec.channels) {
        const double rate = ch.sample_rate_hz;
        if (rate <= 0 || rate != std::floor(rate))
            throw ValidationError("write_edf: sample rates must be positive integers (1 s records)");
        const long nr = static_cast<long>(
            std::ceil(static_cast<double>(ch.samples.size()) / rate));
        n_records = std::max(n_records, nr);
    }

    struct Calib {
        double phys_min, phys_max;
        long dig_min = -32768, dig_max = 32767;
    };
    std::vector<Calib> calib(rec.channels.size());
    std::vector<std::string> pmin_str(rec.channels.size()), pmax_str(rec.channels.size());
    for (size_t i = 0; i < rec.channels.size(); ++i) {
        const auto& s = rec.channels[i].samples;
        double mn = s.empty() ? -1.0 : *std::min_element(s.begin(), s.end());
        double mx = s.empty() ? 1.0 : *std::max_element(s.begin(), s.end());
        if (mx <= mn) mx = mn + 1.0;
        // print, then reparse: quantization must be against the values the
        // reader will actually see in the 8-char ASCII fields
        pmin_str[i] = num_field(mn, 8);
        pmax_str[i] = num_field(mx, 8);
        calib[i].phys_min = csv::to_double(pmin_str[i], "phys_min");
        calib[i].phys_max = csv::to_double(pmax_str[i], "phys_max");
        if (calib[i].phys_max <= calib[i].phys_min) {
            pmax_str[i] = num_field(calib[i].phys_min + 1.0, 8);
            calib[i].phys_max = csv::to_double(pmax_str[i], "phys_max");
        }
    }

    const size_t ns = rec.channels.size();
    std::string out;
    out.reserve(kHeaderBytes + ns * kPerSignalBytes);
    put_field(out, "0", 8);
    put_field(out, rec.subject_id, 80);
    put_field(out, "bhc synthetic recording", 80);
    put_field(out, "01.01.20", 8);
    put_field(out, "00.00.00", 8);
    put_field(out, std::to_string(kHeaderBytes + ns * kPerSignalBytes), 8);
    put_field(out, "EDF+C", 44);
    put_field(out, std::to_string(n_records), 8);
    put_field(out, num_field(record_dur, 8), 8);
    put_field(out, std::to_string(ns), 4);

    for (const auto& ch : rec.channels) put_field(out, ch.label, 16);
    for (size_t i = 0; i < ns; ++i) put_field(out, "", 80);
    for (size_t i = 0; i < ns; ++i) put_field(out, "uV", 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, pmin_str[i], 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, pmax_str[i], 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, std::to_string(calib[i].dig_min), 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, std::to_string(calib[i].dig_max), 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, "", 80);
    for (const auto& ch : rec.channels)
        put_field(out, std::to_string(static_cast<long>(ch.sample_rate_hz)), 8);
    for (size_t i = 0; i < ns; ++i) put_field(out, "", 32);

    for (long r = 0; r < n_records; ++r) {
        for (size_t i = 0; i < ns; ++i) {
            const auto& ch = rec.channels[i];
            const auto& c = calib[i];
            const double gain = (c.phys_max - c.phys_min) / static_cast<double>(c.dig_max - c.dig_min);
            const size_t per_rec = static_cast<size_t>(ch.sample_rate_hz);
            for (size_t k = 0; k < per_rec; ++k) {
                const size_t idx = static_cast<size_t>(r) * per_rec + k;
                const double v = idx < ch.samples.size() ? ch.samples[idx] : c.phys_min;
                long dig = c.dig_min +
                           static_cast<long>(std::lround((v - c.phys_min) / gain));
                dig = std::clamp(dig, c.dig_min, c.dig_max);
                const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(dig));
                out.push_back(static_cast<char>(u & 0xff));
                out.push_back(static_cast<char>((u >> 8) & 0xff));
            }
        }
    }
    return out;
}

void write_edf_file(const Recording& rec, const std::string& path) {
    const std::string bytes = write_edf(rec);
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw Error("cannot write EDF file: " + path);
    outf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!outf) throw Error("write failed: " + path);
}

std::vector<EdfAnnotation> parse_edf_annotations(std::string_view bytes) {
    const ParsedHeader h = parse_header(bytes);

    size_t record_samples = 0;
    for (const auto& s : h.signals) record_samples += static_cast<size_t>(s.samples_per_record);
    const size_t record_bytes = record_samples * 2;

    std::vector<EdfAnnotation> out;
    size_t pos = h.data_offset;
    for (long r = 0; r < h.n_records; ++r) {
        if (pos + record_bytes > bytes.size())
            throw ParseError(log::cat("EDF truncated in data record ", r));
        size_t sig_pos = pos;
        for (const auto& s : h.signals) {
            const size_t nbytes = static_cast<size_t>(s.samples_per_record) * 2;
            if (is_annotation_label(s.label)) {
                const std::string_view tal_block = bytes.substr(sig_pos, nbytes);
                size_t p = 0;
                while (p < tal_block.size() && tal_block[p] != '\0') {
                    const size_t end = tal_block.find('\0', p);
                    const std::string_view tal =
                        tal_block.substr(p, end == std::string_view::npos ? tal_block.size() - p
                                                                          : end - p);
                    // TAL: onset [ \x15 duration ] \x14 text \x14 [text \x14 ...]
                    const size_t d14 = tal.find('\x14');
                    if (d14 != std::string_view::npos) {
                        std::string_view head = tal.substr(0, d14);
                        double onset = 0.0, dur = 0.0;
                        const size_t d15 = head.find('\x15');
                        try {
                            if (d15 != std::string_view::npos) {
                                onset = csv::to_double(std::string(head.substr(0, d15)), "TAL onset");
                                dur = csv::to_double(std::string(head.substr(d15 + 1)), "TAL duration");
                            } else {
                                onset = csv::to_double(std::string(head), "TAL onset");
                            }
                            size_t t = d14 + 1;
                            while (t < tal.size()) {
                                const size_t t_end = tal.find('\x14', t);
                                const std::string_view text =
                                    tal.substr(t, t_end == std::string_view::npos ? tal.size() - t
                                                                                  : t_end - t);
                                if (!text.empty())
                                    out.push_back({onset, dur, std::string(text)});
                                if (t_end == std::string_view::npos) break;
                                t = t_end + 1;
                            }
                        } catch (const ParseError&) {
                            log::warn(log::cat("skipping malformed TAL in record ", r));
                        }
                    }
                    if (end == std::string_view::npos) break;
                    p = end + 1;
                }
            }
            sig_pos += nbytes;
        }
        pos += record_bytes;
    }
    return out;
}

} // namespace bhc::io

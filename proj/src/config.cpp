#include "bhc/config.hpp"

#include "bhc/csv.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace bhc::pipeline {

namespace fs = std::filesystem;

TomlTable TomlTable::parse(const std::string& text) {
    TomlTable t;
    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside quotes
        bool in_quote = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            else if (line[i] == '#' && !in_quote) {
                line.resize(i);
                break;
            }
        }
        const std::string s = csv::trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ParseError(log::cat("TOML line ", line_no, ": unterminated section header"));
            section = csv::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError(log::cat("TOML line ", line_no, ": expected key = value"));
        const std::string key = csv::trim(s.substr(0, eq));
        const std::string value = csv::trim(s.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError(log::cat("TOML line ", line_no, ": empty key or value"));
        t.values_[section.empty() ? key : section + "." + key] = value;
    }
    return t;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

bool TomlTable::has(const std::string& key) const {
    return values_.count(key) > 0;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return csv::to_double(it->second, "config key " + key);
}

long TomlTable::get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return csv::to_int(it->second, "config key " + key);
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ParseError("config key " + key + " must be true or false");
}

std::vector<double> TomlTable::get_array(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ParseError("config key " + key + " must be an array [..]");
    std::vector<double> out;
    for (const auto& tok : csv::split(v.substr(1, v.size() - 2))) {
        if (tok.empty()) continue;
        out.push_back(csv::to_double(tok, "config key " + key));
    }
    return out;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    const TomlTable t = TomlTable::parse_file(path);
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        if (p.empty()) return p;
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    PipelineConfig c;
    c.manifest = resolve(t.get_string("dataset.manifest", ""));
    c.epoch_len_s = t.get_double("dataset.epoch_len_s", c.epoch_len_s);

    c.ecg.minmax_window_s = t.get_double("ecg.minmax_window_s", c.ecg.minmax_window_s);
    c.ecg.interp_rate_hz = t.get_double("ecg.interp_rate_hz", c.ecg.interp_rate_hz);
    c.ecg.band_lo_hz = t.get_double("ecg.band_lo_hz", c.ecg.band_lo_hz);
    c.ecg.band_hi_hz = t.get_double("ecg.band_hi_hz", c.ecg.band_hi_hz);
    c.ecg.hf_lo_hz = t.get_double("ecg.hf_lo_hz", c.ecg.hf_lo_hz);
    c.ecg.hf_hi_hz = t.get_double("ecg.hf_hi_hz", c.ecg.hf_hi_hz);
    c.ecg.butterworth_order = static_cast<int>(t.get_int("ecg.butterworth_order", c.ecg.butterworth_order));
    c.ecg.modwpt_level = static_cast<int>(t.get_int("ecg.modwpt_level", c.ecg.modwpt_level));
    c.ecg.min_beats_per_epoch = static_cast<int>(t.get_int("ecg.min_beats_per_epoch", c.ecg.min_beats_per_epoch));
    c.ecg.rri_min_ms = t.get_double("ecg.rri_min_ms", c.ecg.rri_min_ms);
    c.ecg.rri_max_ms = t.get_double("ecg.rri_max_ms", c.ecg.rri_max_ms);

    c.eeg.welch.seg_len_s = t.get_double("eeg.welch_seg_len_s", c.eeg.welch.seg_len_s);
    c.eeg.welch.overlap_frac = t.get_double("eeg.welch_overlap", c.eeg.welch.overlap_frac);
    for (size_t b = 0; b < eeg::kNumBands; ++b) {
        const std::string name = eeg::band_name(static_cast<eeg::Band>(b));
        auto edges = t.get_array("eeg.band_" + name,
                                 {c.eeg.bands[b].lo_hz, c.eeg.bands[b].hi_hz});
        if (edges.size() != 2) throw ParseError("eeg.band_" + name + " must be [lo, hi]");
        c.eeg.bands[b].lo_hz = edges[0];
        c.eeg.bands[b].hi_hz = edges[1];
    }

    c.model.per_electrode = t.get_bool("model.per_electrode", c.model.per_electrode);
    c.model.reference_stage = static_cast<int>(t.get_int("model.reference_stage", c.model.reference_stage));
    c.model.drop_aliased = t.get_bool("model.drop_aliased", c.model.drop_aliased);

    auto stages = t.get_array("cluster.stages", {2, 4});
    auto ks = t.get_array("cluster.k", {3, 4});
    if (stages.size() != ks.size())
        throw ParseError("cluster.stages and cluster.k must have equal lengths");
    c.cluster.stages.clear();
    c.cluster.k.clear();
    for (size_t i = 0; i < stages.size(); ++i) {
        c.cluster.stages.push_back(static_cast<int>(stages[i]));
        c.cluster.k.push_back(static_cast<int>(ks[i]));
    }
    const std::string linkage = t.get_string("cluster.linkage", "ward");
    if (linkage == "ward") c.cluster.linkage = cluster::Linkage::Ward;
    else if (linkage == "average") c.cluster.linkage = cluster::Linkage::Average;
    else if (linkage == "complete") c.cluster.linkage = cluster::Linkage::Complete;
    else throw ParseError("cluster.linkage must be ward|average|complete");
    c.cluster.max_epochs_per_subject = t.get_int("cluster.max_epochs_per_subject", 0);

    c.out_dir = resolve(t.get_string("output.dir", c.out_dir));
    c.jobs = static_cast<int>(t.get_int("run.jobs", c.jobs));
    c.seed = static_cast<std::uint64_t>(t.get_int("run.seed", static_cast<long>(c.seed)));
    c.synth_profile = t.get_string("synth.profile", c.synth_profile);
    return c;
}

std::string PipelineConfig::canonical() const {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) {
        s += k;
        s += '=';
        s += v;
        s += '\n';
    };
    kv("manifest", manifest);
    kv("epoch_len_s", csv::fmt(epoch_len_s));
    kv("ecg.minmax_window_s", csv::fmt(ecg.minmax_window_s));
    kv("ecg.interp_rate_hz", csv::fmt(ecg.interp_rate_hz));
    kv("ecg.band", csv::fmt(ecg.band_lo_hz) + ":" + csv::fmt(ecg.band_hi_hz));
    kv("ecg.hf", csv::fmt(ecg.hf_lo_hz) + ":" + csv::fmt(ecg.hf_hi_hz));
    kv("ecg.butterworth_order", csv::fmt(static_cast<std::int64_t>(ecg.butterworth_order)));
    kv("ecg.modwpt_level", csv::fmt(static_cast<std::int64_t>(ecg.modwpt_level)));
    kv("ecg.min_beats_per_epoch", csv::fmt(static_cast<std::int64_t>(ecg.min_beats_per_epoch)));
    kv("ecg.rri_range", csv::fmt(ecg.rri_min_ms) + ":" + csv::fmt(ecg.rri_max_ms));
    kv("eeg.welch", csv::fmt(eeg.welch.seg_len_s) + ":" + csv::fmt(eeg.welch.overlap_frac));
    for (const auto& b : eeg.bands)
        kv(std::string("eeg.band.") + eeg::band_name(b.band),
           csv::fmt(b.lo_hz) + ":" + csv::fmt(b.hi_hz));
    kv("model.per_electrode", model.per_electrode ? "1" : "0");
    kv("model.reference_stage", csv::fmt(static_cast<std::int64_t>(model.reference_stage)));
    kv("model.drop_aliased", model.drop_aliased ? "1" : "0");
    for (size_t i = 0; i < cluster.stages.size(); ++i)
        kv("cluster.stage" + std::to_string(cluster.stages[i]),
           csv::fmt(static_cast<std::int64_t>(cluster.k[i])));
    kv("cluster.linkage", std::to_string(static_cast<int>(cluster.linkage)));
    kv("cluster.max_epochs_per_subject", csv::fmt(static_cast<std::int64_t>(cluster.max_epochs_per_subject)));
    kv("seed", csv::fmt(static_cast<std::int64_t>(seed)));
    return s;
}

std::uint64_t PipelineConfig::hash() const {
    return csv::fnv1a(canonical());
}

std::string PipelineConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

std::string default_config_toml(const std::string& manifest_path) {
    std::string s;
    s += "[dataset]\n";
    s += "manifest = \"" + manifest_path + "\"\n";
    s += "epoch_len_s = 30\n\n";
    s += "[ecg]\n";
    s += "minmax_window_s = 2.0\n";
    s += "interp_rate_hz = 4\n";
    s += "band_lo_hz = 0.04\n";
    s += "band_hi_hz = 0.4\n";
    s += "hf_lo_hz = 0.15\n";
    s += "hf_hi_hz = 0.4\n";
    s += "butterworth_order = 4\n";
    s += "modwpt_level = 4\n";
    s += "min_beats_per_epoch = 10\n";
    s += "rri_min_ms = 300\n";
    s += "rri_max_ms = 2000\n\n";
    s += "[eeg]\n";
    s += "welch_seg_len_s = 4\n";
    s += "welch_overlap = 0.5\n";
    s += "band_delta = [1, 4]\n";
    s += "band_theta = [4, 8]\n";
    s += "band_alpha = [8, 12]\n";
    s += "band_beta = [12, 30]\n";
    s += "band_gamma = [30, 80]\n\n";
    s += "[model]\n";
    s += "per_electrode = true\n";
    s += "reference_stage = 0\n";
    s += "drop_aliased = true\n\n";
    s += "[cluster]\n";
    s += "stages = [2, 4]\n";
    s += "k = [3, 4]\n";
    s += "linkage = \"ward\"\n\n";
    s += "[output]\n";
    s += "dir = \"out\"\n\n";
    s += "[run]\n";
    s += "jobs = 1\n";
    s += "seed = 12345\n";
    return s;
}

} // namespace bhc::pipeline

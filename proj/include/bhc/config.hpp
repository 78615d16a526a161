#pragma once

#include "bhc/cluster.hpp"
#include "bhc/ecg.hpp"
#include "bhc/eeg.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bhc::pipeline {

/// Flat TOML subset: [section] headers, key = value with string, number,
/// boolean and scalar-array values, # comments. Enough for the pipeline
/// config file; nested tables are not supported.
class TomlTable {
public:
    static TomlTable parse(const std::string& text);
    static TomlTable parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_array(const std::string& key, std::vector<double> fallback) const;

private:
    std::map<std::string, std::string> values_; // "section.key" -> raw value
};

struct ModelConfig {
    bool per_electrode = true; // one model per electrode; pooled model behind this flag
    int reference_stage = 0;   // Wake
    bool drop_aliased = true;  // pipeline default; strict API contract errors instead
};

struct ClusterConfig {
    std::vector<int> stages = {2, 4}; // N2 and REM
    std::vector<int> k = {3, 4};      // per stage, aligned with `stages`
    cluster::Linkage linkage = cluster::Linkage::Ward;
    long max_epochs_per_subject = 0;  // 0 = no subsampling
};

struct PipelineConfig {
    std::string manifest;
    double epoch_len_s = 30.0;
    ecg::EcgConfig ecg{};
    eeg::EegConfig eeg{};
    ModelConfig model{};
    ClusterConfig cluster{};
    std::string out_dir = "out";
    int jobs = 1;
    std::uint64_t seed = 12345;
    std::string synth_profile = "night";

    /// Reads the TOML file; unknown keys are ignored, missing keys keep
    /// their defaults. Relative paths resolve against the config file.
    static PipelineConfig load(const std::string& path);

    /// Deterministic serialization of every analysis-relevant parameter.
    std::string canonical() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

/// Default config file contents pointing at the given manifest.
std::string default_config_toml(const std::string& manifest_path);

} // namespace bhc::pipeline

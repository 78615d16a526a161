#pragma once

#include "bhc/config.hpp"

#include <string>

namespace bhc::pipeline {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 2 partial (some subjects failed), 1 fatal.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

/// Parse + validate the dataset, write <out>/index.json.
int cmd_ingest(const PipelineConfig& cfg);

/// Run ECG + EEG pipelines per recording (parallel across recordings),
/// build the long-format feature table, write features.csv + metadata.
int cmd_features(const PipelineConfig& cfg);

/// Fit the mixed model(s), write effect CSVs, model JSON, diagnostics JSON.
int cmd_fit(const PipelineConfig& cfg);

/// Per-stage cluster analyses and their CSV artifacts.
int cmd_cluster(const PipelineConfig& cfg);

/// Render SVG figures from existing artifacts.
int cmd_plot(const PipelineConfig& cfg);

/// Generate a synthetic dataset (EDFs, hypnogram CSVs, manifest, truth
/// JSON and a ready config) under out_dir.
int cmd_synth(const std::string& out_dir, const std::string& profile, std::uint64_t seed);

/// ingest -> features -> fit -> cluster -> plot.
int cmd_run_all(const PipelineConfig& cfg);

} // namespace bhc::pipeline

#include "bhc/config.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"
#include "bhc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    int jobs = 0;
};

bhc::pipeline::PipelineConfig load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) throw bhc::ValidationError("--config is required");
    auto cfg = bhc::pipeline::PipelineConfig::load(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.jobs > 0) cfg.jobs = opts.jobs;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config TOML")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--jobs", opts.jobs, "worker threads for per-recording stages");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"brain-heart coupling pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    int rc_mode = 0; // which command ran

    auto* ingest = app.add_subcommand("ingest", "parse and validate the dataset");
    add_common(ingest, opts);
    auto* features = app.add_subcommand("features", "per-epoch EEG band powers and HF-HRV");
    add_common(features, opts);
    auto* fit = app.add_subcommand("fit", "mixed-effects model and effect tables");
    add_common(fit, opts);
    auto* cluster = app.add_subcommand("cluster", "per-stage hierarchical clustering");
    add_common(cluster, opts);
    auto* plot = app.add_subcommand("plot", "SVG figures from existing artifacts");
    add_common(plot, opts);
    auto* run_all = app.add_subcommand("run-all", "full pipeline");
    add_common(run_all, opts);

    std::string synth_out = "synth";
    std::string synth_profile = "night";
    std::uint64_t synth_seed = 12345;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_out, "dataset directory");
    synth->add_option("--profile", synth_profile, "night|quick|subtypes-n2");
    synth->add_option("--seed", synth_seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace bhc::pipeline;
        if (synth->parsed()) return cmd_synth(synth_out, synth_profile, synth_seed);
        if (ingest->parsed()) return cmd_ingest(load_config(opts));
        if (features->parsed()) return cmd_features(load_config(opts));
        if (fit->parsed()) return cmd_fit(load_config(opts));
        if (cluster->parsed()) return cmd_cluster(load_config(opts));
        if (plot->parsed()) return cmd_plot(load_config(opts));
        if (run_all->parsed()) return cmd_run_all(load_config(opts));
        (void)rc_mode;
    } catch (const std::exception& ex) {
        bhc::log::error(ex.what());
        return bhc::pipeline::kExitFatal;
    }
    return 0;
}

#include "bhc/pipeline.hpp"

#include "bhc/csv.hpp"
#include "bhc/dataset.hpp"
#include "bhc/edf.hpp"
#include "bhc/error.hpp"
#include "bhc/features.hpp"
#include "bhc/hypnogram.hpp"
#include "bhc/lmm.hpp"
#include "bhc/log.hpp"
#include "bhc/svg.hpp"
#include "bhc/synth.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace bhc::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_file_atomic(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write file: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// RunManifest: provenance + counts + timings, written atomically.
class RunManifest {
public:
    RunManifest(const PipelineConfig& cfg, std::string stage)
        : stage_(std::move(stage)) {
        doc_["config_hash"] = cfg.hash_hex();
        doc_["version"] = kVersion;
        doc_["stage"] = stage_;
        doc_["counts"] = json::object();
        doc_["timings_ms"] = json::object();
        doc_["warnings"] = json::array();
    }
    void count(const std::string& key, long v) { doc_["counts"][key] = v; }
    void timing(const std::string& key, double ms) { doc_["timings_ms"][key] = ms; }
    void warn(const std::string& msg) {
        doc_["warnings"].push_back(msg);
        log::warn(msg);
    }
    void write(const std::string& out_dir) {
        write_file_atomic((fs::path(out_dir) / ("run_manifest_" + stage_ + ".json")).string(),
                          doc_.dump(2) + "\n");
    }

private:
    std::string stage_;
    json doc_;
};

/// Per-stage input-hash cache; unchanged inputs skip recomputation.
class StageCache {
public:
    explicit StageCache(const std::string& out_dir)
        : path_((fs::path(out_dir) / "cache.json").string()) {
        if (fs::exists(path_)) {
            try {
                doc_ = json::parse(read_file(path_));
            } catch (...) {
                doc_ = json::object();
            }
        } else {
            doc_ = json::object();
        }
    }
    bool fresh(const std::string& stage, const std::string& key,
               const std::vector<std::string>& outputs) const {
        if (!doc_.contains(stage) || doc_[stage] != key) return false;
        for (const auto& o : outputs)
            if (!fs::exists(o)) return false;
        return true;
    }
    void update(const std::string& stage, const std::string& key) {
        doc_[stage] = key;
        write_file_atomic(path_, doc_.dump(2) + "\n");
    }

private:
    std::string path_;
    json doc_;
};

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string dataset_input_key(const PipelineConfig& cfg) {
    std::uint64_t h = cfg.hash();
    h ^= csv::fnv1a_file(cfg.manifest);
    for (const auto& e : io::parse_manifest(cfg.manifest)) {
        if (e.exclude) continue;
        if (fs::exists(e.edf_path)) h ^= csv::fnv1a_file(e.edf_path) * 1099511628211ull;
        if (fs::exists(e.hypnogram_path)) h ^= csv::fnv1a_file(e.hypnogram_path) * 16777619ull;
    }
    return hash_hex(h);
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    jobs = std::clamp(jobs, 1, 64);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int n_workers = std::min<int>(jobs, static_cast<int>(n));
    workers.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) break;
                fn(i);
            }
        });
    }
    for (auto& t : workers) t.join();
}

std::string stage_file_tag(SleepStage s) {
    std::string name = stage_name(s);
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return name;
}

} // namespace

int cmd_ingest(const PipelineConfig& cfg) {
    if (cfg.manifest.empty()) throw ValidationError("no dataset manifest configured");
    RunManifest rm(cfg, "ingest");
    StageCache cache(cfg.out_dir);
    const std::string index_path = (fs::path(cfg.out_dir) / "index.json").string();
    const std::string key = dataset_input_key(cfg);
    if (cache.fresh("ingest", key, {index_path})) {
        log::info("ingest: inputs unchanged, keeping cached index");
        return kExitOk;
    }

    StageTimer timer;
    const io::DatasetLoadResult ds = io::load_dataset(cfg.manifest, cfg.epoch_len_s);

    json index = json::object();
    index["config_hash"] = cfg.hash_hex();
    index["recordings"] = json::array();
    for (const auto& rec : ds.recordings) {
        json r;
        r["subject"] = rec.subject_id;
        r["n_epochs"] = rec.hypnogram.n_epochs();
        r["channels"] = json::array();
        for (const auto& ch : rec.channels) {
            r["channels"].push_back({{"label", ch.label},
                                     {"sample_rate_hz", ch.sample_rate_hz},
                                     {"n_samples", ch.samples.size()}});
        }
        std::map<std::string, long> stage_counts;
        for (SleepStage s : rec.hypnogram.stages) ++stage_counts[stage_name(s)];
        r["stage_epochs"] = stage_counts;
        index["recordings"].push_back(r);
    }
    index["skipped"] = json::array();
    for (const auto& [id, reason] : ds.skipped) index["skipped"].push_back({{"subject", id}, {"reason", reason}});
    index["errors"] = json::array();
    for (const auto& [id, msg] : ds.errors) {
        index["errors"].push_back({{"subject", id}, {"error", msg}});
        rm.warn(id + ": " + msg);
    }
    write_file_atomic(index_path, index.dump(2) + "\n");

    rm.count("recordings", static_cast<long>(ds.recordings.size()));
    rm.count("skipped", static_cast<long>(ds.skipped.size()));
    rm.count("errors", static_cast<long>(ds.errors.size()));
    rm.timing("ingest", timer.ms());
    rm.write(cfg.out_dir);
    cache.update("ingest", key);

    if (ds.recordings.empty()) return kExitFatal;
    return ds.errors.empty() ? kExitOk : kExitPartial;
}

int cmd_features(const PipelineConfig& cfg) {
    if (cfg.manifest.empty()) throw ValidationError("no dataset manifest configured");
    RunManifest rm(cfg, "features");
    StageCache cache(cfg.out_dir);
    const std::string csv_path = (fs::path(cfg.out_dir) / "features.csv").string();
    const std::string meta_path = (fs::path(cfg.out_dir) / "features_meta.json").string();
    const std::string key = dataset_input_key(cfg);
    if (cache.fresh("features", key, {csv_path, meta_path})) {
        log::info("features: inputs unchanged, keeping cached table");
        return kExitOk;
    }

    StageTimer timer;
    const io::DatasetLoadResult ds = io::load_dataset(cfg.manifest, cfg.epoch_len_s);
    for (const auto& [id, msg] : ds.errors) rm.warn(id + " failed to load: " + msg);
    if (ds.recordings.empty()) {
        rm.write(cfg.out_dir);
        log::error("features: no loadable recordings");
        return kExitFatal;
    }

    const size_t n = ds.recordings.size();
    std::vector<feat::SubjectFeatures> features(n);
    std::vector<std::string> failures(n);
    parallel_for(n, cfg.jobs, [&](size_t i) {
        const Recording& rec = ds.recordings[i];
        try {
            feat::SubjectFeatures sf;
            sf.subject_id = rec.subject_id;
            sf.hypnogram = rec.hypnogram;
            sf.hrv = ecg::process_ecg(rec, cfg.ecg);
            sf.eeg_c3 = eeg::process_eeg(rec, eeg::Electrode::C3, cfg.eeg);
            sf.eeg_c4 = eeg::process_eeg(rec, eeg::Electrode::C4, cfg.eeg);
            features[i] = std::move(sf);
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
        }
    });

    std::vector<feat::SubjectFeatures> ok;
    long failed = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!failures[i].empty()) {
            rm.warn(ds.recordings[i].subject_id + " skipped: " + failures[i]);
            ++failed;
        } else {
            ok.push_back(std::move(features[i]));
        }
    }
    if (ok.empty()) {
        rm.write(cfg.out_dir);
        log::error("features: every recording failed");
        return kExitFatal;
    }

    feat::FeatureTable table = feat::build_table(ok);
    table.provenance = cfg.hash_hex() + " " + cfg.manifest;
    write_file_atomic(csv_path, feat::format_table_csv(table));

    json meta;
    meta["config_hash"] = cfg.hash_hex();
    meta["manifest"] = cfg.manifest;
    meta["lambda_yj"] = table.lambda_yj;
    meta["n_rows"] = table.rows.size();
    std::map<std::string, long> per_subject;
    for (const auto& r : table.rows) ++per_subject[r.subject_id];
    meta["rows_per_subject"] = per_subject;
    write_file_atomic(meta_path, meta.dump(2) + "\n");

    rm.count("recordings", static_cast<long>(ok.size()));
    rm.count("recordings_failed", failed);
    rm.count("rows", static_cast<long>(table.rows.size()));
    rm.timing("features", timer.ms());
    rm.write(cfg.out_dir);
    cache.update("features", key);

    if (failed > 0 && ok.empty()) return kExitFatal;
    return failed == 0 && ds.errors.empty() ? kExitOk : kExitPartial;
}

namespace {

json fit_to_json(const stats::ModelFit& fit) {
    json j;
    j["converged"] = fit.converged;
    j["reml_loglik"] = fit.reml_loglik;
    j["n_obs"] = fit.n_obs;
    j["rank_x"] = fit.rank_x;
    j["df_resid"] = fit.df_resid;
    j["sigma2_resid"] = fit.sigma2_resid;
    for (size_t b = 0; b < fit.block_names.size(); ++b) {
        j["variance_components"][fit.block_names[b]] = fit.sigma2_blocks[b];
        j["theta"][fit.block_names[b]] = fit.theta[b];
    }
    j["coefficients"] = json::object();
    for (size_t c = 0; c < fit.col_names.size(); ++c) {
        j["coefficients"][fit.col_names[c]] = {
            {"estimate", fit.beta(static_cast<long>(c))},
            {"std_error", std::sqrt(std::max(0.0, fit.cov_beta(static_cast<long>(c), static_cast<long>(c))))}};
    }
    return j;
}

json diagnostics_to_json(const stats::Diagnostics& d) {
    json j;
    j["resid_mean"] = d.resid_mean;
    j["resid_sd"] = d.resid_sd;
    j["qq_correlation"] = d.qq_correlation;
    j["hist_edges"] = d.hist_edges;
    j["hist_counts"] = d.hist_counts;
    auto pairs_to_json = [](const std::vector<std::pair<double, double>>& v) {
        json a = json::array();
        for (const auto& [x, y] : v) a.push_back({x, y});
        return a;
    };
    j["qq"] = pairs_to_json(d.qq);
    j["fitted_resid"] = pairs_to_json(d.fitted_resid);
    return j;
}

} // namespace

int cmd_fit(const PipelineConfig& cfg) {
    RunManifest rm(cfg, "fit");
    StageCache cache(cfg.out_dir);
    const std::string csv_path = (fs::path(cfg.out_dir) / "features.csv").string();
    if (!fs::exists(csv_path))
        throw Error("fit: missing features.csv; run the features step first");

    const std::string slopes_path = (fs::path(cfg.out_dir) / "effects_slopes.csv").string();
    const std::string contrasts_path = (fs::path(cfg.out_dir) / "effects_contrasts.csv").string();
    const std::string key = hash_hex(cfg.hash() ^ csv::fnv1a_file(csv_path));
    if (cache.fresh("fit", key, {slopes_path, contrasts_path})) {
        log::info("fit: inputs unchanged, keeping cached model outputs");
        return kExitOk;
    }

    StageTimer timer;
    const feat::FeatureTable table = feat::parse_table_csv(csv_path);

    std::vector<stats::ModelSpec> specs;
    if (cfg.model.per_electrode) {
        for (auto e : {eeg::Electrode::C3, eeg::Electrode::C4}) {
            stats::ModelSpec s;
            s.electrode = e;
            s.rank_policy = cfg.model.drop_aliased ? stats::ModelSpec::RankPolicy::DropAliased
                                                   : stats::ModelSpec::RankPolicy::Error;
            specs.push_back(s);
        }
    } else {
        stats::ModelSpec s;
        s.pooled = true;
        s.rank_policy = cfg.model.drop_aliased ? stats::ModelSpec::RankPolicy::DropAliased
                                               : stats::ModelSpec::RankPolicy::Error;
        specs.push_back(s);
    }

    std::vector<stats::EffectRow> all_slopes, all_contrasts;
    for (const auto& spec : specs) {
        const stats::MixedDesign design = stats::build_design(table, spec);
        const stats::ModelFit fit = stats::fit_reml(design);
        if (!fit.converged) rm.warn("REML fit did not reach the convergence tolerance");
        const stats::EffectReport rep = stats::stage_slopes(fit, spec);
        all_slopes.insert(all_slopes.end(), rep.stage_slopes.begin(), rep.stage_slopes.end());
        all_contrasts.insert(all_contrasts.end(), rep.wake_contrasts.begin(), rep.wake_contrasts.end());

        const std::string tag = spec.pooled ? "pooled" : eeg::electrode_name(spec.electrode);
        write_file_atomic((fs::path(cfg.out_dir) / ("model_" + tag + ".json")).string(),
                          fit_to_json(fit).dump(2) + "\n");
        const stats::Diagnostics diag = stats::residual_diagnostics(fit, design);
        write_file_atomic((fs::path(cfg.out_dir) / ("diagnostics_" + tag + ".json")).string(),
                          diagnostics_to_json(diag).dump(2) + "\n");
        rm.count("n_obs_" + tag, fit.n_obs);
    }

    write_file_atomic(slopes_path, stats::format_effects_csv(all_slopes));
    write_file_atomic(contrasts_path, stats::format_effects_csv(all_contrasts));
    rm.timing("fit", timer.ms());
    rm.write(cfg.out_dir);
    cache.update("fit", key);
    return kExitOk;
}

int cmd_cluster(const PipelineConfig& cfg) {
    RunManifest rm(cfg, "cluster");
    StageCache cache(cfg.out_dir);
    const std::string csv_path = (fs::path(cfg.out_dir) / "features.csv").string();
    if (!fs::exists(csv_path))
        throw Error("cluster: missing features.csv; run the features step first");

    std::vector<std::string> outputs;
    for (int code : cfg.cluster.stages) {
        const std::string tag = stage_file_tag(stage_from_code(code));
        outputs.push_back((fs::path(cfg.out_dir) / ("cluster_" + tag + "_labels.csv")).string());
    }
    const std::string key = hash_hex(cfg.hash() ^ csv::fnv1a_file(csv_path));
    if (cache.fresh("cluster", key, outputs)) {
        log::info("cluster: inputs unchanged, keeping cached artifacts");
        return kExitOk;
    }

    StageTimer timer;
    feat::FeatureTable table = feat::parse_table_csv(csv_path);

    if (cfg.cluster.max_epochs_per_subject > 0) {
        std::map<std::string, long> taken;
        std::vector<feat::FeatureRow> capped;
        for (auto& r : table.rows)
            if (taken[r.subject_id]++ < cfg.cluster.max_epochs_per_subject)
                capped.push_back(std::move(r));
        table.rows = std::move(capped);
    }

    for (size_t si = 0; si < cfg.cluster.stages.size(); ++si) {
        const SleepStage stage = stage_from_code(cfg.cluster.stages[si]);
        const int k = cfg.cluster.k[si];
        const std::string tag = stage_file_tag(stage);
        cluster::ClusterResult res;
        try {
            res = cluster::analyze_stage(table, stage, k, cfg.cluster.linkage);
        } catch (const Error& e) {
            rm.warn(std::string("cluster ") + stage_name(stage) + ": " + e.what());
            continue;
        }

        std::string labels = "subject,epoch,stage,cluster\n";
        for (size_t i = 0; i < res.labels.size(); ++i) {
            labels += res.subject_ids[i] + "," + csv::fmt(static_cast<std::int64_t>(res.epoch_indices[i])) +
                      "," + csv::fmt(static_cast<std::int64_t>(stage_code(stage))) + "," +
                      csv::fmt(static_cast<std::int64_t>(res.labels[i])) + "\n";
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_labels.csv")).string(), labels);

        std::string means = "feature";
        for (int c = 0; c < res.k; ++c) means += ",cluster_" + std::to_string(c);
        means += "\n";
        for (long f = 0; f < res.means.cols(); ++f) {
            means += res.feature_names[static_cast<size_t>(f)];
            for (int c = 0; c < res.k; ++c) means += "," + csv::fmt(res.means(c, f));
            means += "\n";
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_means.csv")).string(), means);

        std::string tukey = "feature,cluster_i,cluster_j,diff,se,q,p\n";
        for (long f = 0; f < res.means.cols(); ++f) {
            for (const auto& cmp : res.tukey[static_cast<size_t>(f)]) {
                tukey += res.feature_names[static_cast<size_t>(f)] + "," +
                         csv::fmt(static_cast<std::int64_t>(cmp.cluster_i)) + "," +
                         csv::fmt(static_cast<std::int64_t>(cmp.cluster_j)) + "," + csv::fmt(cmp.diff) +
                         "," + csv::fmt(cmp.se) + "," + csv::fmt(cmp.q) + "," + csv::fmt(cmp.p) + "\n";
            }
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_tukey.csv")).string(), tukey);

        std::string pca = "epoch,pc1,pc2,cluster\n";
        for (size_t i = 0; i < res.labels.size(); ++i) {
            pca += csv::fmt(static_cast<std::int64_t>(res.epoch_indices[i])) + "," +
                   csv::fmt(res.pca.coords(static_cast<long>(i), 0)) + "," +
                   csv::fmt(res.pca.coords(static_cast<long>(i), 1)) + "," +
                   csv::fmt(static_cast<std::int64_t>(res.labels[i])) + "\n";
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_pca.csv")).string(), pca);

        std::string dist = "subject,cluster,proportion\n";
        for (const auto& [subj, props] : res.distribution) {
            for (size_t c = 0; c < props.size(); ++c)
                dist += subj + "," + csv::fmt(static_cast<std::int64_t>(c)) + "," + csv::fmt(props[c]) + "\n";
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_distribution.csv")).string(), dist);

        std::string top = "cluster,rank,feature,direction,max_pair_p,std_diff\n";
        for (size_t c = 0; c < res.top_features.size(); ++c) {
            for (size_t r = 0; r < res.top_features[c].size(); ++r) {
                const auto& df = res.top_features[c][r];
                top += csv::fmt(static_cast<std::int64_t>(c)) + "," +
                       csv::fmt(static_cast<std::int64_t>(r + 1)) + "," +
                       res.feature_names[static_cast<size_t>(df.feature)] + "," +
                       (df.above_grand_mean ? "up" : "down") + "," + csv::fmt(df.max_pair_p) + "," +
                       csv::fmt(df.std_diff) + "\n";
            }
        }
        write_file_atomic((fs::path(cfg.out_dir) / ("cluster_" + tag + "_top_features.csv")).string(), top);

        rm.count("epochs_" + tag, static_cast<long>(res.labels.size()));
        rm.count("k_" + tag, res.k);
    }

    rm.timing("cluster", timer.ms());
    rm.write(cfg.out_dir);
    cache.update("cluster", key);
    return kExitOk;
}

int cmd_plot(const PipelineConfig& cfg) {
    RunManifest rm(cfg, "plot");
    const fs::path out(cfg.out_dir);
    const std::string features_path = (out / "features.csv").string();
    if (!fs::exists(features_path))
        throw Error("plot: missing features.csv; run the features step first");
    const fs::path plots = out / "plots";
    fs::create_directories(plots);

    StageTimer timer;
    const feat::FeatureTable table = feat::parse_table_csv(features_path);

    // per-stage histograms of per-subject epoch counts
    {
        std::map<int, std::map<std::string, double>> counts; // stage -> subject -> n
        for (const auto& r : table.rows) ++counts[stage_code(r.stage)][r.subject_id];
        std::vector<std::pair<std::string, std::vector<double>>> series;
        for (const auto& [code, per_subj] : counts) {
            std::vector<double> vals;
            for (const auto& [subj, v] : per_subj) vals.push_back(v);
            series.emplace_back(stage_name(stage_from_code(code)), vals);
        }
        write_file_atomic((plots / "hist_epochs_per_stage.svg").string(),
                          report::render_histogram_panels(series, 12, "Epochs per subject by stage"));
    }

    // subject-level mean feature vs stage boxplots
    const std::array<std::pair<const char*, int>, 3> box_feats = {
        std::make_pair("c3_delta", 0), std::make_pair("c3_beta", 3), std::make_pair("hf_norm", -1)};
    for (const auto& [name, band] : box_feats) {
        std::map<int, std::map<std::string, std::pair<double, long>>> acc;
        for (const auto& r : table.rows) {
            const double v = band < 0 ? r.hf_norm : r.c3[static_cast<size_t>(band)];
            auto& slot = acc[stage_code(r.stage)][r.subject_id];
            slot.first += v;
            slot.second += 1;
        }
        std::vector<std::pair<std::string, std::vector<double>>> groups;
        for (const auto& [code, per_subj] : acc) {
            std::vector<double> means;
            for (const auto& [subj, sv] : per_subj) means.push_back(sv.first / sv.second);
            groups.emplace_back(stage_name(stage_from_code(code)), means);
        }
        write_file_atomic((plots / (std::string("box_") + name + ".svg")).string(),
                          report::render_boxplot(groups, std::string("Subject-level mean ") + name +
                                                              " by stage",
                                                 name));
    }

    // residual diagnostics, when a fit has been run
    for (const std::string tag : {"C3", "C4", "pooled"}) {
        const fs::path diag_path = out / ("diagnostics_" + tag + ".json");
        if (!fs::exists(diag_path)) continue;
        const json d = json::parse(read_file(diag_path.string()));
        std::vector<std::pair<double, double>> qq;
        for (const auto& p : d["qq"]) qq.emplace_back(p[0].get<double>(), p[1].get<double>());
        write_file_atomic((plots / ("resid_qq_" + tag + ".svg")).string(),
                          report::render_qq(qq, "Conditional residual Q-Q (" + tag + ")"));

        std::vector<double> centers;
        std::vector<long> counts = d["hist_counts"].get<std::vector<long>>();
        std::vector<double> edges = d["hist_edges"].get<std::vector<double>>();
        std::vector<double> expanded;
        for (size_t b = 0; b + 1 < edges.size() && b < counts.size(); ++b) {
            const double c = 0.5 * (edges[b] + edges[b + 1]);
            for (long i = 0; i < counts[b]; ++i) expanded.push_back(c);
        }
        write_file_atomic((plots / ("resid_hist_" + tag + ".svg")).string(),
                          report::render_histogram(expanded, static_cast<int>(counts.size()),
                                                   "Conditional residuals (" + tag + ")", "residual"));
    }

    // cluster figures, when clustering has been run
    for (int code : cfg.cluster.stages) {
        const std::string tag = stage_file_tag(stage_from_code(code));
        const fs::path pca_path = out / ("cluster_" + tag + "_pca.csv");
        const fs::path dist_path = out / ("cluster_" + tag + "_distribution.csv");
        if (fs::exists(pca_path)) {
            const auto rows = csv::read_file(pca_path.string());
            std::vector<double> x, y;
            std::vector<int> lbl;
            for (size_t i = 1; i < rows.size(); ++i) {
                x.push_back(csv::to_double(rows[i][1], "pc1"));
                y.push_back(csv::to_double(rows[i][2], "pc2"));
                lbl.push_back(static_cast<int>(csv::to_int(rows[i][3], "cluster")));
            }
            write_file_atomic((plots / ("pca_" + tag + ".svg")).string(),
                              report::render_scatter(x, y, lbl, "PCA of " + std::string(tag) + " epochs",
                                                     "PC1", "PC2"));
        }
        if (fs::exists(dist_path)) {
            const auto rows = csv::read_file(dist_path.string());
            std::map<std::string, std::vector<double>> per_subject;
            std::vector<std::string> order;
            for (size_t i = 1; i < rows.size(); ++i) {
                auto& v = per_subject[rows[i][0]];
                if (v.empty()) order.push_back(rows[i][0]);
                const size_t c = static_cast<size_t>(csv::to_int(rows[i][1], "cluster"));
                if (v.size() <= c) v.resize(c + 1, 0.0);
                v[c] = csv::to_double(rows[i][2], "proportion");
            }
            std::vector<std::pair<std::string, std::vector<double>>> bars;
            for (const auto& s : order) bars.emplace_back(s, per_subject[s]);
            write_file_atomic((plots / ("dist_" + tag + ".svg")).string(),
                              report::render_stacked_bars(bars, "Subject-cluster distribution (" +
                                                                    std::string(tag) + ")"));
        }
    }

    rm.timing("plot", timer.ms());
    rm.write(cfg.out_dir);
    return kExitOk;
}

int cmd_synth(const std::string& out_dir, const std::string& profile, std::uint64_t seed) {
    fs::create_directories(out_dir);

    struct SubjectPlan {
        std::string id;
        double hours;
        bool subtypes;
        double wander_uv;
    };
    std::vector<SubjectPlan> plan;
    if (profile == "night") {
        plan = {{"S001", 2.5, true, 0.0}, {"S002", 2.5, true, 250.0}, {"S003", 2.5, true, 0.0}};
    } else if (profile == "quick") {
        plan = {{"S001", 0.75, false, 0.0}, {"S002", 0.75, false, 0.0}};
    } else if (profile == "subtypes-n2") {
        plan = {{"S001", 2.0, true, 0.0},
                {"S002", 2.0, true, 0.0},
                {"S003", 2.0, true, 0.0},
                {"S004", 2.0, true, 0.0}};
    } else {
        throw ValidationError("unknown synth profile: " + profile + " (night|quick|subtypes-n2)");
    }

    std::string manifest = "subject_id,edf_path,hypnogram_path,exclude\n";
    json truth = json::object();
    for (size_t i = 0; i < plan.size(); ++i) {
        synth::SynthSpec spec;
        spec.subject_id = plan[i].id;
        spec.hours = plan[i].hours;
        spec.seed = seed + i * 1000003ull;
        spec.n2_subtypes = plan[i].subtypes;
        spec.wander_amp_uv = plan[i].wander_uv;
        const synth::SynthResult res = synth::generate_recording(spec);

        const std::string edf_name = plan[i].id + ".edf";
        const std::string hyp_name = plan[i].id + "_hypnogram.csv";
        io::write_edf_file(res.recording, (fs::path(out_dir) / edf_name).string());
        write_file_atomic((fs::path(out_dir) / hyp_name).string(),
                          io::format_hypnogram(res.recording.hypnogram));
        manifest += plan[i].id + "," + edf_name + "," + hyp_name + ",0\n";

        json t;
        t["beat_times_s"] = res.truth.beat_times_s;
        t["stage_codes"] = res.truth.stage_codes;
        t["n2_subtype"] = res.truth.n2_subtype;
        t["hf_depth_ms"] = res.truth.hf_depth;
        truth[plan[i].id] = t;
    }
    write_file_atomic((fs::path(out_dir) / "manifest.csv").string(), manifest);
    write_file_atomic((fs::path(out_dir) / "truth.json").string(), truth.dump(2) + "\n");
    write_file_atomic((fs::path(out_dir) / "bhc.toml").string(), default_config_toml("manifest.csv"));
    log::info(log::cat("synthetic dataset '", profile, "' written to ", out_dir));
    return kExitOk;
}

int cmd_run_all(const PipelineConfig& cfg) {
    int worst = kExitOk;
    auto update = [&](int rc) {
        if (rc == kExitFatal || worst == kExitFatal) worst = kExitFatal;
        else worst = std::max(worst, rc);
        return worst != kExitFatal;
    };
    if (!update(cmd_ingest(cfg))) return worst;
    if (!update(cmd_features(cfg))) return worst;
    if (!update(cmd_fit(cfg))) return worst;
    if (!update(cmd_cluster(cfg))) return worst;
    update(cmd_plot(cfg));
    return worst;
}

} // namespace bhc::pipeline

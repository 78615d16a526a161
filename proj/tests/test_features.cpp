#include "bhc/features.hpp"
#include "bhc/error.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

using namespace bhc;

TEST_CASE("yeo_johnson branch identities") {
    for (double x : {0.0, 0.5, 1.0, 10.0}) CHECK(feat::yeo_johnson(x, 1.0) == doctest::Approx(x).epsilon(1e-12));
    CHECK(feat::yeo_johnson(std::exp(1.0) - 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(feat::yeo_johnson(-(std::exp(1.0) - 1.0), 2.0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("yeo_johnson is continuous at the log branch points") {
    for (double x : {-50.0, -3.0, -0.2, 0.4, 7.0, 90.0}) {
        const double eps = 1e-6;
        if (x >= 0) {
            CHECK(std::fabs(feat::yeo_johnson(x, eps) - feat::yeo_johnson(x, 0.0)) <= 1e-8);
            CHECK(std::fabs(feat::yeo_johnson(x, -eps) - feat::yeo_johnson(x, 0.0)) <= 1e-8);
        } else {
            CHECK(std::fabs(feat::yeo_johnson(x, 2.0 + eps) - feat::yeo_johnson(x, 2.0)) <= 1e-8);
            CHECK(std::fabs(feat::yeo_johnson(x, 2.0 - eps) - feat::yeo_johnson(x, 2.0)) <= 1e-8);
        }
    }
}

TEST_CASE("yeo_johnson is strictly increasing in x") {
    for (double lambda : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0}) {
        double prev = feat::yeo_johnson(-100.0, lambda);
        for (double x = -99.0; x <= 100.0; x += 1.0) {
            const double y = feat::yeo_johnson(x, lambda);
            CHECK(y > prev);
            prev = y;
        }
    }
}

TEST_CASE("yeo_johnson inverse round trip") {
    for (double lambda : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0}) {
        for (double x = -100.0; x <= 100.0; x += 2.5) {
            const double y = feat::yeo_johnson(x, lambda);
            const double back = feat::yeo_johnson_inverse(y, lambda);
            CHECK(std::fabs(back - x) <= 1e-9 * std::max(1.0, std::fabs(x)));
        }
    }
}

TEST_CASE("fit_lambda recovers the identity on normal data") {
    const auto x = oracle::gaussian_vector(10000, 99);
    const double lambda = feat::fit_lambda(x);
    CHECK(lambda >= 0.9);
    CHECK(lambda <= 1.1);
}

TEST_CASE("fit_lambda prefers a log-like transform for exp(normal)-1 data") {
    auto x = oracle::gaussian_vector(5000, 123);
    for (auto& v : x) v = std::exp(v) - 1.0;
    const double s_before = std::fabs(oracle::skewness(x));
    const double lambda = feat::fit_lambda(x);
    CHECK(lambda < 0.5);

    std::vector<double> z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = feat::yeo_johnson(x[i], lambda);
    CHECK(std::fabs(oracle::skewness(z)) < s_before);
}

TEST_CASE("fit_lambda degenerate input returns 1") {
    std::vector<double> flat(100, 2.5);
    CHECK(feat::fit_lambda(flat) == 1.0);
    CHECK_THROWS_AS(feat::fit_lambda(std::vector<double>(3, 1.0)), ValidationError);
}

namespace {

feat::SubjectFeatures make_subject(const std::string& id, size_t n_epochs, size_t n_invalid_hrv,
                                   unsigned seed) {
    feat::SubjectFeatures sf;
    sf.subject_id = id;
    sf.hypnogram.epoch_len_s = 30.0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (size_t e = 0; e < n_epochs; ++e) {
        sf.hypnogram.stages.push_back(stage_from_code(static_cast<int>(e % 5)));
        ecg::HrvEpoch hrv;
        hrv.epoch_index = static_cast<long>(e);
        hrv.valid = e >= n_invalid_hrv;
        hrv.status = hrv.valid ? ecg::EpochStatus::Ok : ecg::EpochStatus::InsufficientBeats;
        hrv.hf_abs = 1000.0 + 100.0 * u(rng);
        hrv.total_abs = hrv.hf_abs * 2.0;
        hrv.hf_norm = hrv.hf_abs / hrv.total_abs;
        sf.hrv.push_back(hrv);
        for (auto* v : {&sf.eeg_c3, &sf.eeg_c4}) {
            eeg::EegEpoch ep;
            ep.epoch_index = static_cast<long>(e);
            ep.valid = true;
            double total = 0.0;
            for (size_t b = 0; b < eeg::kNumBands; ++b) {
                ep.rel_power[b] = 0.1 + u(rng);
                total += ep.rel_power[b];
            }
            for (size_t b = 0; b < eeg::kNumBands; ++b) ep.rel_power[b] /= total;
            ep.total_abs = 100.0;
            v->push_back(ep);
        }
    }
    return sf;
}

} // namespace

TEST_CASE("build_table joins on validity and stage") {
    // 900 scored epochs with 12 invalid HRV epochs -> 888 rows
    auto sf = make_subject("S1", 900, 12, 1);
    const auto table = feat::build_table({sf});
    CHECK(table.rows.size() == 888);
    for (const auto& r : table.rows) {
        CHECK(r.stage != SleepStage::Unscored);
        CHECK(std::isfinite(r.hf_yj));
        CHECK(r.hf_yj == doctest::Approx(feat::yeo_johnson(r.hf_norm, table.lambda_yj)).epsilon(1e-12));
    }

    // all epochs unscored -> error
    auto bad = make_subject("S2", 10, 0, 2);
    for (auto& s : bad.hypnogram.stages) s = SleepStage::Unscored;
    CHECK_THROWS_AS(feat::build_table({bad}), ValidationError);
}

TEST_CASE("build_table never fabricates rows and counts stages per subject") {
    auto a = make_subject("A", 50, 5, 3);
    auto b = make_subject("B", 35, 0, 4);
    const auto table = feat::build_table({b, a}); // deliberately unsorted input

    size_t valid_a = 45, valid_b = 35;
    size_t count_a = 0, count_b = 0;
    for (const auto& r : table.rows) {
        if (r.subject_id == "A") ++count_a;
        else ++count_b;
    }
    CHECK(count_a <= valid_a);
    CHECK(count_b <= valid_b);

    // sorted by subject then epoch
    for (size_t i = 1; i < table.rows.size(); ++i) {
        const auto& p = table.rows[i - 1];
        const auto& q = table.rows[i];
        CHECK((p.subject_id < q.subject_id ||
               (p.subject_id == q.subject_id && p.epoch_index < q.epoch_index)));
    }

    // per-(subject,stage) counts match the generator's hypnogram composition
    std::map<std::pair<std::string, int>, long> counts;
    for (const auto& r : table.rows) ++counts[{r.subject_id, stage_code(r.stage)}];
    long expect_b_wake = 0;
    for (size_t e = 0; e < b.hypnogram.stages.size(); ++e)
        if (b.hypnogram.stages[e] == SleepStage::Wake) ++expect_b_wake;
    CHECK(counts[{"B", 0}] == expect_b_wake);
}

TEST_CASE("feature table CSV round trip") {
    auto sf = make_subject("CSV", 40, 2, 9);
    const auto table = feat::build_table({sf});
    const std::string csv = feat::format_table_csv(table);

    const auto tmp = std::filesystem::temp_directory_path() / "bhc_feat_roundtrip.csv";
    {
        std::ofstream out(tmp);
        out << csv;
    }
    const auto back = feat::parse_table_csv(tmp.string());
    REQUIRE(back.rows.size() == table.rows.size());
    for (size_t i = 0; i < back.rows.size(); ++i) {
        CHECK(back.rows[i].subject_id == table.rows[i].subject_id);
        CHECK(back.rows[i].epoch_index == table.rows[i].epoch_index);
        CHECK(back.rows[i].stage == table.rows[i].stage);
        CHECK(back.rows[i].hf_yj == table.rows[i].hf_yj); // exact: shortest round-trip formatting
        for (size_t b = 0; b < eeg::kNumBands; ++b) {
            CHECK(back.rows[i].c3[b] == table.rows[i].c3[b]);
            CHECK(back.rows[i].c4[b] == table.rows[i].c4[b]);
        }
    }
    std::filesystem::remove(tmp);
}

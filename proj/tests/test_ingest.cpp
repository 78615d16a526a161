#include "bhc/dataset.hpp"
#include "bhc/edf.hpp"
#include "bhc/error.hpp"
#include "bhc/hypnogram.hpp"
#include "bhc/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace bhc;
namespace fs = std::filesystem;

namespace {

void put(std::string& s, const std::string& v, size_t len) {
    std::string f = v.substr(0, len);
    f.resize(len, ' ');
    s += f;
}

/// Hand-built single-signal EDF: 2 records of 1 s at 4 Hz.
std::string minimal_edf(const std::string& phys_min = "-100", const std::string& phys_max = "100",
                        const std::string& dig_min = "-32767", const std::string& dig_max = "32767",
                        const std::string& reserved = "") {
    std::string h;
    put(h, "0", 8);
    put(h, "T001", 80);
    put(h, "test recording", 80);
    put(h, "01.01.20", 8);
    put(h, "00.00.00", 8);
    put(h, "512", 8);
    put(h, reserved, 44);
    put(h, "2", 8);   // records
    put(h, "1", 8);   // record duration
    put(h, "1", 4);   // signals
    put(h, "ECG", 16);
    put(h, "", 80);
    put(h, "uV", 8);
    put(h, phys_min, 8);
    put(h, phys_max, 8);
    put(h, dig_min, 8);
    put(h, dig_max, 8);
    put(h, "", 80);
    put(h, "4", 8);   // samples per record
    put(h, "", 32);
    return h;
}

void push_i16(std::string& s, int v) {
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    s.push_back(static_cast<char>(u & 0xff));
    s.push_back(static_cast<char>((u >> 8) & 0xff));
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("bhc_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("parse_edf calibrates digital endpoints to physical endpoints") {
    std::string bytes = minimal_edf();
    for (int r = 0; r < 2; ++r) {
        push_i16(bytes, -32767);
        push_i16(bytes, 0);
        push_i16(bytes, 32767);
        push_i16(bytes, 0);
    }
    const Recording rec = io::parse_edf(bytes);
    REQUIRE(rec.channels.size() == 1);
    const auto& ch = rec.channels[0];
    CHECK(ch.sample_rate_hz == 4.0);
    REQUIRE(ch.samples.size() == 8);
    CHECK(ch.samples[0] == doctest::Approx(-100.0).epsilon(1e-12));
    CHECK(ch.samples[2] == doctest::Approx(100.0).epsilon(1e-12));
    // symmetric ranges: digital 0 -> physical 0
    CHECK(ch.samples[1] == doctest::Approx(0.0).epsilon(0));
    // spec'd formula: physical = digital * (physMax-physMin)/(digMax-digMin) + offset
    const double gain = 200.0 / 65534.0;
    CHECK(ch.samples[0] == doctest::Approx(-32767 * gain + 0.0).epsilon(1e-12));
}

TEST_CASE("parse_edf error paths carry context") {
    // malformed version
    std::string bad = minimal_edf();
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(io::parse_edf(bad), doctest::Contains("version"), ParseError);

    // dig_min == dig_max
    std::string flat = minimal_edf("-100", "100", "5", "5");
    for (int i = 0; i < 16; ++i) flat.push_back('\0');
    CHECK_THROWS_WITH_AS(io::parse_edf(flat), doctest::Contains("calibration"), ParseError);

    // truncated data record: only 1.5 records present
    std::string trunc = minimal_edf();
    for (int i = 0; i < 6; ++i) push_i16(trunc, 0);
    CHECK_THROWS_WITH_AS(io::parse_edf(trunc), doctest::Contains("record 1"), ParseError);

    // EDF+D rejected
    std::string edfd = minimal_edf("-100", "100", "-32767", "32767", "EDF+D");
    for (int i = 0; i < 8; ++i) push_i16(edfd, 0);
    CHECK_THROWS_WITH_AS(io::parse_edf(edfd), doctest::Contains("EDF+D"), ParseError);

    // non-numeric header field with byte offset in the message
    std::string badnum = minimal_edf("abc");
    for (int i = 0; i < 8; ++i) push_i16(badnum, 0);
    CHECK_THROWS_WITH_AS(io::parse_edf(badnum), doctest::Contains("phys_min"), ParseError);
}

TEST_CASE("EDF write-then-parse round trip recovers a sine within one quantization step") {
    Recording rec;
    rec.subject_id = "RT01";
    ChannelSignal ch;
    ch.label = "EEG C3-M2";
    ch.sample_rate_hz = 256.0;
    const size_t n = 256 * 10;
    ch.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        ch.samples[i] = 123.4 * std::sin(2.0 * std::numbers::pi * 7.0 * static_cast<double>(i) / 256.0);
    rec.channels.push_back(ch);

    const std::string bytes = io::write_edf(rec);
    const Recording back = io::parse_edf(bytes);
    REQUIRE(back.channels.size() == 1);
    REQUIRE(back.channels[0].samples.size() == n);
    CHECK(back.channels[0].label == "EEG C3-M2");
    CHECK(back.channels[0].sample_rate_hz == 256.0);

    // one quantization step of the written calibration
    const double step = (2 * 123.4 * 1.001) / 65535.0;
    for (size_t i = 0; i < n; ++i)
        CHECK(std::fabs(back.channels[0].samples[i] - ch.samples[i]) <= step);
}

TEST_CASE("hypnogram CSV parsing and round trip") {
    const Hypnogram h = io::parse_hypnogram("0,0\n1,2\n2,4", 30.0);
    REQUIRE(h.stages.size() == 3);
    CHECK(h.stages[0] == SleepStage::Wake);
    CHECK(h.stages[1] == SleepStage::N2);
    CHECK(h.stages[2] == SleepStage::Rem);

    CHECK_THROWS_AS(io::parse_hypnogram("", 30.0), ParseError);
    CHECK_THROWS_AS(io::parse_hypnogram("0,0\n0,1", 30.0), ParseError); // non-monotone

    // unknown code becomes Unscored
    const Hypnogram h7 = io::parse_hypnogram("0,7", 30.0);
    CHECK(h7.stages[0] == SleepStage::Unscored);

    // header tolerated; round trip is exact
    Hypnogram full;
    full.epoch_len_s = 30.0;
    full.stages = {SleepStage::Wake, SleepStage::N1, SleepStage::N2, SleepStage::N3, SleepStage::Rem,
                   SleepStage::Unscored};
    const Hypnogram round = io::parse_hypnogram(io::format_hypnogram(full), 30.0);
    REQUIRE(round.stages.size() == full.stages.size());
    for (size_t i = 0; i < full.stages.size(); ++i) CHECK(round.stages[i] == full.stages[i]);
}

TEST_CASE("stage codes map bijectively on 0-4") {
    for (int code = 0; code <= 4; ++code) CHECK(stage_code(stage_from_code(code)) == code);
    CHECK(stage_from_code(9) == SleepStage::Unscored);
    CHECK(stage_from_code(-1) == SleepStage::Unscored);
}

TEST_CASE("EDF+ annotation stream parses into a hypnogram") {
    // one annotation signal, 2 records, 1 s each, 32 "samples" = 64 bytes per record
    std::string h;
    put(h, "0", 8);
    put(h, "T002", 80);
    put(h, "scoring", 80);
    put(h, "01.01.20", 8);
    put(h, "00.00.00", 8);
    put(h, "512", 8);
    put(h, "EDF+C", 44);
    put(h, "2", 8);
    put(h, "1", 8);
    put(h, "1", 4);
    put(h, "EDF Annotations", 16);
    put(h, "", 80);
    put(h, "", 8);
    put(h, "-1", 8);
    put(h, "1", 8);
    put(h, "-32768", 8);
    put(h, "32767", 8);
    put(h, "", 80);
    put(h, "32", 8);
    put(h, "", 32);

    auto tal_record = [](const std::string& tal) {
        std::string r = tal;
        r.resize(64, '\0');
        return r;
    };
    h += tal_record(std::string("+0\x15") + "30\x14Sleep stage W\x14\x00");
    h += tal_record(std::string("+30\x15") + "60\x14Sleep stage N2\x14\x00");

    const Hypnogram hyp = io::parse_hypnogram(h, 30.0);
    REQUIRE(hyp.stages.size() == 3);
    CHECK(hyp.stages[0] == SleepStage::Wake);
    CHECK(hyp.stages[1] == SleepStage::N2);
    CHECK(hyp.stages[2] == SleepStage::N2); // 60 s duration covers two epochs
}

TEST_CASE("load_dataset honors exclusions and collects per-subject errors") {
    const fs::path dir = temp_dir("dataset");

    for (int i = 0; i < 2; ++i) {
        synth::SynthSpec spec;
        spec.subject_id = "S00" + std::to_string(i + 1);
        spec.hours = 30.0 / 3600.0 * 4; // 4 epochs
        spec.seed = 7 + static_cast<unsigned>(i);
        const auto res = synth::generate_recording(spec);
        io::write_edf_file(res.recording, (dir / (spec.subject_id + ".edf")).string());
        std::ofstream hyp(dir / (spec.subject_id + ".csv"));
        hyp << io::format_hypnogram(res.recording.hypnogram);
    }

    std::ofstream mf(dir / "manifest.csv");
    mf << "subject_id,edf_path,hypnogram_path,exclude\n";
    mf << "S001,S001.edf,S001.csv,0\n";
    mf << "S002,S002.edf,S002.csv,1\n";
    mf << "S003,missing.edf,missing.csv,0\n";
    mf.close();

    const auto result = io::load_dataset((dir / "manifest.csv").string(), 30.0);
    CHECK(result.recordings.size() == 1);
    CHECK(result.recordings[0].subject_id == "S001");
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].first == "S002");
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].first == "S003");

    fs::remove_all(dir);
}

TEST_CASE("channel lookup matches derivation prefixes case-insensitively") {
    Recording rec;
    rec.subject_id = "X";
    for (const char* label : {"EEG C3-M2", "EEG C4-M1", "ECG"}) {
        ChannelSignal ch;
        ch.label = label;
        ch.sample_rate_hz = 256.0;
        ch.samples = {0.0};
        rec.channels.push_back(ch);
    }
    CHECK(rec.find_channel("C3") == &rec.channels[0]);
    CHECK(rec.find_channel("c3-m2") == &rec.channels[0]);
    CHECK(rec.find_channel("C4") == &rec.channels[1]);
    CHECK(rec.find_channel("ECG") == &rec.channels[2]);
    CHECK(rec.find_channel("F4") == nullptr);
}

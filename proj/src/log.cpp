#include "bhc/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace bhc::log {

namespace {

Level g_threshold = Level::Info;
bool g_initialized = false;
std::mutex g_mutex;

Level parse_level(const char* s) {
    std::string v(s);
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "debug") return Level::Debug;
    if (v == "info") return Level::Info;
    if (v == "warn" || v == "warning") return Level::Warn;
    if (v == "error" || v == "err") return Level::Err;
    if (v == "off" || v == "none") return Level::Off;
    return Level::Info;
}

const char* tag(Level lv) {
    switch (lv) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Err: return "error";
        default: return "?";
    }
}

} // namespace

Level threshold() {
    std::lock_guard lock(g_mutex);
    if (!g_initialized) {
        if (const char* env = std::getenv("BHC_LOG")) g_threshold = parse_level(env);
        g_initialized = true;
    }
    return g_threshold;
}

void set_threshold(Level lv) {
    std::lock_guard lock(g_mutex);
    g_threshold = lv;
    g_initialized = true;
}

void emit(Level lv, const std::string& msg) {
    if (static_cast<int>(lv) < static_cast<int>(threshold())) return;
    std::lock_guard lock(g_mutex);
    std::fprintf(stderr, "[bhc %s] %s\n", tag(lv), msg.c_str());
}

} // namespace bhc::log

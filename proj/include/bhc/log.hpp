#pragma once

#include <sstream>
#include <string>

namespace bhc::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Err = 3, Off = 4 };

/// Threshold comes from the BHC_LOG env var (debug|info|warn|error|off),
/// default info. Read once at first use.
Level threshold();
void set_threshold(Level lv);

void emit(Level lv, const std::string& msg);

inline void debug(const std::string& m) { emit(Level::Debug, m); }
inline void info(const std::string& m) { emit(Level::Info, m); }
inline void warn(const std::string& m) { emit(Level::Warn, m); }
inline void error(const std::string& m) { emit(Level::Err, m); }

/// Small helper so call sites can write log::info(log::cat("x=", x)).
template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

} // namespace bhc::log

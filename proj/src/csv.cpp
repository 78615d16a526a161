#include "bhc/csv.hpp"

#include "bhc/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

namespace bhc::csv {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt(std::int64_t v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::vector<std::vector<std::string>> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        rows.push_back(split(line));
    }
    return rows;
}

double to_double(const std::string& field, const std::string& context) {
    const char* b = field.c_str();
    char* end = nullptr;
    double v = std::strtod(b, &end);
    if (end == b || *end != '\0')
        throw ParseError("not a number: '" + field + "' (" + context + ")");
    return v;
}

std::int64_t to_int(const std::string& field, const std::string& context) {
    std::int64_t v = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw ParseError("not an integer: '" + field + "' (" + context + ")");
    return v;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    return h;
}

} // namespace bhc::csv

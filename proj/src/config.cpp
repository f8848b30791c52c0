#include "wafertex/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "wafertex/image_io.hpp"

namespace wafertex {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

template <typename T>
T convert(const std::string& origin, std::string_view key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(origin + ": bad value '" + text + "' for " + std::string(key));
    }
    return v;
}

}  // namespace

Config Config::parse(std::string_view text, std::initializer_list<std::string_view> allowed,
                     const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument(where + ": expected key=value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument(where + ": empty key");
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw std::invalid_argument(where + ": unknown key '" + std::string(key) + "'");
        }
        if (!cfg.values_.emplace(std::string(key), std::string(value)).second) {
            throw std::invalid_argument(where + ": duplicate key '" + std::string(key) + "'");
        }
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path, std::initializer_list<std::string_view> allowed) {
    const std::vector<char> bytes = read_file(path);
    return parse(std::string_view(bytes.data(), bytes.size()), allowed, path.string());
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string Config::get_string(std::string_view key, std::string fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(std::string_view key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double v = convert<double>(origin_, key, it->second);
    if (!std::isfinite(v)) throw std::invalid_argument(origin_ + ": non-finite value for " + std::string(key));
    return v;
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : convert<std::int64_t>(origin_, key, it->second);
}

std::uint64_t Config::get_uint(std::string_view key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : convert<std::uint64_t>(origin_, key, it->second);
}

bool Config::get_bool(std::string_view key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    throw std::invalid_argument(origin_ + ": bad boolean '" + it->second + "' for " + std::string(key));
}

}  // namespace wafertex

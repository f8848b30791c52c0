#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>

namespace wafertex {

// Flat key=value configuration, one pair per line, '#' comments. Parsing is
// strict: duplicate keys and keys outside the caller's allowed set are errors.
class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, std::initializer_list<std::string_view> allowed,
                        const std::string& origin = "config");
    static Config load(const std::filesystem::path& path, std::initializer_list<std::string_view> allowed);

    bool has(std::string_view key) const;
    std::string get_string(std::string_view key, std::string fallback) const;
    double get_double(std::string_view key, double fallback) const;
    std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
    std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;

    // Sets or replaces a value; used for command-line overrides.
    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
    const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

private:
    std::string origin_;
    std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace wafertex

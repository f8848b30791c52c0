#include "wafertex/records.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

#include "wafertex/image_io.hpp"

namespace wafertex {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
T parse_number(std::string_view field, const char* what) {
    T v{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw std::invalid_argument(std::string("detection record: bad ") + what + " '" + std::string(field) + "'");
    }
    return v;
}

}  // namespace

std::string format_real(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::invalid_argument("format_real: conversion failed");
    return std::string(buf, ptr);
}

std::string format_record(const DetectionRecord& r) {
    if (r.image_id.empty() || r.image_id.find_first_of(" \t\r\n#") != std::string::npos) {
        throw std::invalid_argument("detection record: image id must be non-empty without whitespace or '#'");
    }
    const Detection& d = r.detection;
    std::string out = r.image_id + " " + std::to_string(d.class_id) + " " + format_real(d.score) + " " +
                      format_real(d.box.x1) + " " + format_real(d.box.y1) + " " + format_real(d.box.x2) + " " +
                      format_real(d.box.y2);
    if (d.mask) {
        d.mask->validate();
        out += " rle " + std::to_string(d.mask->height) + " " + std::to_string(d.mask->width);
        for (const auto run : d.mask->runs) out += " " + std::to_string(run);
    }
    return out;
}

DetectionRecord parse_record(std::string_view line) {
    const auto f = split_fields(line);
    if (f.size() < 7) throw std::invalid_argument("detection record: expected at least 7 fields");
    DetectionRecord r;
    r.image_id = std::string(f[0]);
    r.detection.class_id = parse_number<int>(f[1], "class id");
    r.detection.score = parse_number<double>(f[2], "score");
    r.detection.box.x1 = parse_number<double>(f[3], "x1");
    r.detection.box.y1 = parse_number<double>(f[4], "y1");
    r.detection.box.x2 = parse_number<double>(f[5], "x2");
    r.detection.box.y2 = parse_number<double>(f[6], "y2");
    if (r.detection.class_id < 0) throw std::invalid_argument("detection record: negative class id");
    for (std::size_t i = 2; i <= 6; ++i) {
        if (!std::isfinite(parse_number<double>(f[i], "number"))) {
            throw std::invalid_argument("detection record: non-finite number");
        }
    }
    if (f.size() > 7) {
        if (f[7] != "rle" || f.size() < 10) throw std::invalid_argument("detection record: malformed rle payload");
        RleMask m;
        m.height = parse_number<std::size_t>(f[8], "rle height");
        m.width = parse_number<std::size_t>(f[9], "rle width");
        for (std::size_t i = 10; i < f.size(); ++i) m.runs.push_back(parse_number<std::uint32_t>(f[i], "rle run"));
        m.validate();
        r.detection.mask = std::move(m);
    }
    return r;
}

std::string format_records(const std::vector<DetectionRecord>& records) {
    std::string out = "# image_id class_id score x1 y1 x2 y2 [rle H W runs...]\n";
    for (const auto& r : records) out += format_record(r) + "\n";
    return out;
}

std::vector<DetectionRecord> parse_records(std::string_view text, const std::string& origin) {
    std::vector<DetectionRecord> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') {
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": CR line ending");
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') continue;
        try {
            out.push_back(parse_record(line));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DetectionRecord> read_records(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_file(path);
    return parse_records(std::string_view(bytes.data(), bytes.size()), path.string());
}

void write_records(const std::filesystem::path& path, const std::vector<DetectionRecord>& records) {
    write_file_atomic(path, format_records(records));
}

std::vector<ImageDetections> group_by_image(const std::vector<DetectionRecord>& predictions,
                                            const std::vector<DetectionRecord>& ground_truth) {
    std::map<std::string, ImageDetections> by_id;
    for (const auto& r : predictions) {
        auto& img = by_id[r.image_id];
        img.image_id = r.image_id;
        img.predictions.push_back(r.detection);
    }
    for (const auto& r : ground_truth) {
        auto& img = by_id[r.image_id];
        img.image_id = r.image_id;
        img.ground_truth.push_back(r.detection);
    }
    std::vector<ImageDetections> out;
    out.reserve(by_id.size());
    for (auto& [id, img] : by_id) out.push_back(std::move(img));
    return out;
}

}  // namespace wafertex

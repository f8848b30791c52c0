#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wafertex/metrics.hpp"

namespace wafertex {

// One detection per line:
//   image_id class_id score x1 y1 x2 y2 [rle H W r0 r1 ...]
// '#' starts a comment line. Reals use the shortest round-trip form, so
// parse(format(x)) reproduces every double bit for bit.
struct DetectionRecord {
    std::string image_id;
    Detection detection;

    bool operator==(const DetectionRecord&) const = default;
};

std::string format_record(const DetectionRecord& record);
DetectionRecord parse_record(std::string_view line);

std::string format_records(const std::vector<DetectionRecord>& records);
// `origin` names the source in error messages.
std::vector<DetectionRecord> parse_records(std::string_view text, const std::string& origin = "records");

std::vector<DetectionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<DetectionRecord>& records);

// Pairs predictions with ground truth by image id, ids sorted ascending.
std::vector<ImageDetections> group_by_image(const std::vector<DetectionRecord>& predictions,
                                            const std::vector<DetectionRecord>& ground_truth);

std::string format_real(double v);

}  // namespace wafertex

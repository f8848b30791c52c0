#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wafertex/tensors.hpp"

namespace wafertex {

// File-system or format failure. Malformed files report the byte offset at
// which decoding stopped.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary P5, maxval 255 or 65535 (16-bit samples are big-endian).
Tensor read_pgm(const std::filesystem::path& path);
// Values are rounded to nearest and clamped to [0, maxval].
void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned maxval = 255);

// Grayscale 'Pf'. A negative scale means little-endian samples, positive
// big-endian; rows are stored bottom to top.
Tensor read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Tensor& image);

Mask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);

// 8-bit preview with min-max scaling; "min=...\nmax=...\n" goes to
// `<path>.range.txt`.
void write_heatmap(const std::filesystem::path& path, const Tensor& map);

// "WTNS" container: u32 count, then per tensor u32 name length, name bytes,
// u32 rank (3), u32 dims, float32 data. All little-endian.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
NamedTensors read_tensors(const std::filesystem::path& path);
void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors);

std::vector<char> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace wafertex

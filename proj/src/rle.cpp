#include "wafertex/rle.hpp"

#include <stdexcept>
#include <string>

namespace wafertex {

void RleMask::validate() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i] == 0 && i != 0) {
            throw std::invalid_argument("rle: zero-length run at position " + std::to_string(i));
        }
        total += runs[i];
    }
    if (total != height * width) {
        throw std::invalid_argument("rle: runs sum to " + std::to_string(total) + ", expected " +
                                    std::to_string(height * width));
    }
}

std::size_t RleMask::foreground() const {
    std::size_t n = 0;
    for (std::size_t i = 1; i < runs.size(); i += 2) n += runs[i];
    return n;
}

RleMask rle_encode(const Mask& mask) {
    if (mask.channels() != 1) throw std::invalid_argument("rle_encode: mask must be single-channel");
    RleMask rle;
    rle.height = mask.height();
    rle.width = mask.width();
    std::uint8_t current = 0;
    std::uint32_t count = 0;
    for (const std::uint8_t raw : mask.data()) {
        if (raw > 1) throw std::invalid_argument("rle_encode: mask is not binary");
        if (raw != current) {
            rle.runs.push_back(count);
            current = raw;
            count = 0;
        }
        ++count;
    }
    if (count > 0 || rle.runs.empty()) rle.runs.push_back(count);
    return rle;
}

Mask rle_decode(const RleMask& rle) {
    rle.validate();
    Mask mask(1, rle.height, rle.width);
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (const std::uint32_t run : rle.runs) {
        for (std::uint32_t k = 0; k < run; ++k) mask[pos++] = value;
        value ^= 1;
    }
    return mask;
}

}  // namespace wafertex

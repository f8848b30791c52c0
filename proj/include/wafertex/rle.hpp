#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wafertex/tensors.hpp"

namespace wafertex {

// Row-major run lengths alternating background/foreground, starting with a
// background run (which may be 0 when the first pixel is set).
struct RleMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> runs;

    void validate() const;
    std::size_t foreground() const;
    bool operator==(const RleMask&) const = default;
};

RleMask rle_encode(const Mask& mask);
Mask rle_decode(const RleMask& rle);

}  // namespace wafertex

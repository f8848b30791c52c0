#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wafertex {

// One row of a layer table. `kind` is one of: conv, dwconv, c2f, c2f_muse,
// muse, effective_se, mptce, sppf, upsample, concat.
struct LayerDescriptor {
    std::string kind;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;
    std::size_t repeats = 1;  // bottleneck count for c2f / c2f_muse
    std::size_t input_size = 0;  // square input side in pixels
    bool bias = true;
    std::string label;
};

struct LayerCost {
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    std::size_t output_size = 0;
};

struct ComplexityTotals {
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    std::vector<LayerCost> layers;
};

// Conv params: out * (in / groups) * k * k (+ out with bias).
// Conv FLOPs: 2 * out * (in / groups) * k * k * H_out * W_out (one multiply-add = 2 FLOPs).
LayerCost layer_cost(const LayerDescriptor& layer);
ComplexityTotals count_params_flops(std::span<const LayerDescriptor> layers);

// "conv in=3 out=64 k=3 s=2 p=1 g=1 n=1 size=640 bias=1"
LayerDescriptor parse_layer(std::string_view text);

// Layer list of the texture-aware segmentation network (backbone + neck + the
// head-side conv/attention rows), 640 x 640 input. The segment head itself is
// not included.
std::vector<LayerDescriptor> reference_layer_table();

}  // namespace wafertex

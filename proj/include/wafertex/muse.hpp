#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "wafertex/gradcheck.hpp"
#include "wafertex/tensors.hpp"

namespace wafertex {

// Context block: a local 3x3 branch and a dilation-2 surrounding branch are
// concatenated into x_ctx, then reweighted per channel by EffectiveSE
// attention w = sigmoid(grouped 1x1 conv(GAP(x_ctx))).
struct MuseBlock {
    ConvSpec local;     // 3x3, dilation 1, padding 1
    ConvSpec surround;  // 3x3, dilation 2, padding 2
    ConvSpec se_conv;   // 1x1 over the concatenation, grouped
    std::optional<ConvSpec> projection;  // optional 1x1 epilogue; off by default

    std::size_t in_channels() const { return local.in_channels; }
    std::size_t context_channels() const { return local.out_channels + surround.out_channels; }
    std::size_t out_channels() const {
        return projection ? projection->out_channels : context_channels();
    }

    void validate() const;

    // Splits out_channels evenly between the two branches. se_groups == 0
    // selects depthwise (groups == out_channels). Weights are uniform in
    // [-0.1, 0.1] from the given seed.
    static MuseBlock seeded(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed,
                            std::size_t se_groups = 0);
};

template <typename T>
BasicTensor<T> effective_se(const BasicTensor<T>& x_ctx, const ConvSpec& se_conv);

template <typename T>
BasicTensor<T> muse_forward(const BasicTensor<T>& x, const MuseBlock& block);

// Gradient of <grad_out, muse_forward(x)> with respect to x.
TensorD muse_backward(const TensorD& x, const MuseBlock& block, const TensorD& grad_out);

DifferentiableOp muse_op(const MuseBlock& block);

}  // namespace wafertex

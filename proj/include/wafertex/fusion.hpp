#pragma once

#include <cstddef>
#include <optional>

#include "wafertex/tensors.hpp"

namespace wafertex {

// Sampling feasibility of a defect pattern of a given width at a feature stride.
struct NyquistReport {
    bool feasible = false;
    double ratio = 0.0;                 // defect_width / stride, the raw sample count
    std::size_t largest_feasible_stride = 0;  // among {2,4,8,16,32}; 0 when none qualifies
};

// Feasible iff width / stride >= 2 (at least two samples across the pattern).
NyquistReport nyquist_min_scale(double defect_width, std::size_t stride);

enum class CombineMode { add, concat };

struct FusionConfig {
    ConvSpec align_conv;            // 1x1 channel alignment
    std::size_t upsample_factor = 1;
    CombineMode combine = CombineMode::add;

    void validate() const;
};

// High-resolution branch: align (1x1 conv) -> nearest upsample -> merge with p3.
Tensor p2_fuse(const Tensor& c2, const Tensor& p3, const FusionConfig& cfg);

enum class TriFuseMode { sum, concat };

// Merges the geometric, contextual and texture feature domains. Sum mode is
// exactly invariant to the order of the three inputs.
Tensor tri_domain_fuse(const Tensor& f_geom, const Tensor& f_context, const Tensor& f_texture,
                       TriFuseMode mode);

// Concatenation followed by a 1x1 projection back to a chosen width.
Tensor tri_domain_fuse(const Tensor& f_geom, const Tensor& f_context, const Tensor& f_texture,
                       const ConvSpec& projection);

}  // namespace wafertex

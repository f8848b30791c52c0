#include "wafertex/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wafertex {

namespace {

constexpr std::array<std::size_t, 5> kPyramidStrides = {2, 4, 8, 16, 32};

bool is_pyramid_stride(std::size_t s) {
    return std::find(kPyramidStrides.begin(), kPyramidStrides.end(), s) != kPyramidStrides.end();
}

void check_spatial(const Tensor& a, const Tensor& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw std::invalid_argument(std::string(what) + ": spatial mismatch " + a.shape_string() +
                                    " vs " + b.shape_string());
    }
}

}  // namespace

NyquistReport nyquist_min_scale(double defect_width, std::size_t stride) {
    if (!(defect_width > 0.0) || !std::isfinite(defect_width)) {
        throw std::invalid_argument("nyquist_min_scale: defect width must be positive");
    }
    if (!is_pyramid_stride(stride)) {
        throw std::invalid_argument("nyquist_min_scale: stride " + std::to_string(stride) +
                                    " not in {2,4,8,16,32}");
    }
    NyquistReport report;
    report.ratio = defect_width / static_cast<double>(stride);
    report.feasible = report.ratio >= 2.0;
    for (const std::size_t s : kPyramidStrides) {
        if (defect_width / static_cast<double>(s) >= 2.0) report.largest_feasible_stride = s;
    }
    return report;
}

void FusionConfig::validate() const {
    align_conv.validate();
    if (align_conv.kernel_h != 1 || align_conv.kernel_w != 1) {
        throw std::invalid_argument("p2_fuse: alignment conv must be 1x1");
    }
    if (upsample_factor == 0) throw std::invalid_argument("p2_fuse: upsample factor must be >= 1");
}

Tensor p2_fuse(const Tensor& c2, const Tensor& p3, const FusionConfig& cfg) {
    cfg.validate();
    if (c2.channels() != cfg.align_conv.in_channels) {
        throw std::invalid_argument("p2_fuse: c2 has " + std::to_string(c2.channels()) +
                                    " channels, alignment conv expects " +
                                    std::to_string(cfg.align_conv.in_channels));
    }
    const Tensor aligned = upsample_nearest(conv2d(c2, cfg.align_conv), cfg.upsample_factor);
    if (cfg.combine == CombineMode::add) {
        if (!aligned.same_shape(p3)) {
            throw std::invalid_argument("p2_fuse: aligned branch " + aligned.shape_string() +
                                        " does not match p3 " + p3.shape_string());
        }
        return pointwise(aligned, p3, PointwiseKind::add);
    }
    if (aligned.height() != p3.height() || aligned.width() != p3.width()) {
        throw std::invalid_argument("p2_fuse: aligned branch " + aligned.shape_string() +
                                    " does not match p3 " + p3.shape_string());
    }
    const std::array<Tensor, 2> parts = {aligned, p3};
    return concat_channels<float>(parts);
}

Tensor tri_domain_fuse(const Tensor& f_geom, const Tensor& f_context, const Tensor& f_texture,
                       TriFuseMode mode) {
    check_spatial(f_geom, f_context, "tri_domain_fuse");
    check_spatial(f_geom, f_texture, "tri_domain_fuse");
    if (mode == TriFuseMode::concat) {
        const std::array<Tensor, 3> parts = {f_geom, f_context, f_texture};
        return concat_channels<float>(parts);
    }
    if (f_geom.channels() != f_context.channels() || f_geom.channels() != f_texture.channels()) {
        throw std::invalid_argument("tri_domain_fuse: sum needs equal channels, got " +
                                    f_geom.shape_string() + ", " + f_context.shape_string() + ", " +
                                    f_texture.shape_string());
    }
    Tensor out(f_geom.channels(), f_geom.height(), f_geom.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Sorted summands make the float result independent of argument order.
        std::array<float, 3> v = {f_geom[i], f_context[i], f_texture[i]};
        std::sort(v.begin(), v.end());
        out[i] = static_cast<float>((static_cast<double>(v[0]) + v[1]) + v[2]);
    }
    ensure_finite(out, "tri_domain_fuse");
    return out;
}

Tensor tri_domain_fuse(const Tensor& f_geom, const Tensor& f_context, const Tensor& f_texture,
                       const ConvSpec& projection) {
    if (projection.kernel_h != 1 || projection.kernel_w != 1) {
        throw std::invalid_argument("tri_domain_fuse: projection must be 1x1");
    }
    return conv2d(tri_domain_fuse(f_geom, f_context, f_texture, TriFuseMode::concat), projection);
}

}  // namespace wafertex

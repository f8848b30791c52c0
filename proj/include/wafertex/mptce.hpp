#pragma once

#include <cstddef>
#include <vector>

#include "wafertex/metrics.hpp"
#include "wafertex/spectrum.hpp"
#include "wafertex/tensors.hpp"

namespace wafertex {

struct SpectralPeak {
    std::size_t u = 0;  // horizontal frequency index
    std::size_t v = 0;  // vertical frequency index
    Complex coeff;
};

// Retained support of the periodic model. Every non-DC peak is stored
// together with its Hermitian partner, so the reconstruction is real.
struct SpectrumPeaks {
    std::size_t height = 0;
    std::size_t width = 0;
    bool include_dc = true;
    std::vector<SpectralPeak> peaks;
};

enum class GradientKernel { sobel, central_difference };

struct MptceConfig {
    // Number of dominant conjugate pairs kept besides DC. Not pinned down by
    // the method description; 8 is a working default.
    std::size_t top_k = 8;
    bool include_dc = true;
    // 0 analyses the whole map; otherwise a power-of-two tile with 50% overlap
    // and Hann-weighted overlap-add of the per-tile periodic components.
    std::size_t tile = 0;
    float alpha = 1.0f;
    ConvSpec bca_conv = box_attention_conv();
    GradientKernel gradient = GradientKernel::sobel;

    void validate() const;

    // 3x3 box average, 1 -> 1 channel, padding 1.
    static ConvSpec box_attention_conv(float bias = 0.0f);
};

// DC (when kept) followed by the top_k conjugate classes of non-DC bins by
// magnitude; ties go to the lexicographically smaller (u, v).
SpectrumPeaks extract_periodic_peaks(const Spectrum& s, const MptceConfig& cfg);

// Real inverse transform of the peak-only spectrum.
Tensor periodic_reconstruct(const SpectrumPeaks& peaks, std::size_t height, std::size_t width);

// Periodic component of a single-channel map (whole-map or tiled per cfg.tile).
Tensor periodic_component(const Tensor& f, const MptceConfig& cfg);

// D = |f - f_periodic|, evaluated on the spatial grid.
Tensor disturbance_map(const Tensor& f, const MptceConfig& cfg);

// Gradient magnitude with replicate-edge padding.
Tensor gradient_magnitude(const Tensor& d, GradientKernel kernel);

// A = sigmoid(conv(|grad D|)).
Tensor boundary_attention(const Tensor& disturbance, const MptceConfig& cfg);

struct MptceResult {
    Tensor enhanced;     // F + alpha * A (.) F
    Tensor disturbance;  // channel-mean disturbance map, single channel
    Tensor attention;    // single channel
};

// Per-channel disturbance maps may be computed on `threads` workers; the
// channel mean is folded in channel order so results do not depend on it.
MptceResult mptce_run(const Tensor& features, const MptceConfig& cfg, std::size_t threads = 1);

Tensor mptce_enhance(const Tensor& features, const MptceConfig& cfg, std::size_t threads = 1);

// Turns a single-channel disturbance map into instance predictions: pixels
// above mean + k_sigma * stddev form 4-connected components; components with
// at least min_area pixels become detections (score = peak disturbance),
// listed in raster order of their first pixel.
std::vector<Detection> disturbance_detections(const Tensor& disturbance, double k_sigma, std::size_t min_area,
                                              int class_id);

}  // namespace wafertex

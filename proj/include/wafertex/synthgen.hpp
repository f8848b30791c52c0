#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "wafertex/metrics.hpp"
#include "wafertex/tensors.hpp"

namespace wafertex {

enum class Waveform { sine, square };

struct GratingSpec {
    double period = 8.0;       // pixels, >= 2
    double orientation = 0.0;  // radians; 0 varies along x
    double amplitude = 1.0;
    double phase = 0.0;
    Waveform waveform = Waveform::sine;
};

enum class AnomalyKind { disk, scratch, contamination };

struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::disk;
    double cx = 0.0;  // pixel-center coordinates
    double cy = 0.0;
    double radius = 1.0;     // disk radius; contamination support radius (0 -> 3 * softness)
    double length = 1.0;     // scratch
    double thickness = 1.0;  // scratch
    double angle = 0.0;      // scratch direction, radians
    double contrast = 0.5;
    double softness = 2.0;   // contamination Gaussian sigma
    std::optional<int> class_id;  // defaults from kind
};

struct SceneSpec {
    std::size_t height = 256;
    std::size_t width = 256;
    std::vector<GratingSpec> gratings;
    std::vector<AnomalySpec> anomalies;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct Scene {
    Tensor image;
    Mask mask;
    std::vector<Detection> ground_truth;  // one per anomaly, score 1
};

struct InjectedAnomaly {
    Tensor image;
    Mask mask;
};

// Seven-class wafer defect taxonomy used for class ids.
inline constexpr std::array<std::string_view, 7> kDefectClasses = {
    "block_etch", "coating_bad", "particle", "pi_particle", "po_contamination", "scratch", "sez_burnt"};

int default_class(AnomalyKind kind);

// value(x, y) = amplitude * wave(2 pi (x cos t + y sin t) / period + phase)
Tensor gen_grating(const GratingSpec& spec, std::size_t height, std::size_t width);

// Grating whose frequency falls exactly on DFT bin (u, v) of a height x width map.
GratingSpec bin_aligned_grating(int u, int v, std::size_t height, std::size_t width, double amplitude,
                                double phase = 0.0);

InjectedAnomaly inject_anomaly(const Tensor& image, const AnomalySpec& spec);

// Gratings + anomalies + N(0, noise_sigma^2) noise. Noise uses mt19937_64
// seeded with spec.seed; each sample is Box-Muller (cosine branch) over two
// 53-bit uniforms, drawn in row-major pixel order.
Scene gen_scene(const SceneSpec& spec);

// 3 contrast levels (0.1, 0.25, 0.5 of the main grating amplitude) x 3
// anomaly kinds x 5 seeds on size x size maps, two bin-aligned gratings,
// noise sigma 0.01.
std::vector<SceneSpec> standard_suite(std::size_t size = 256);

}  // namespace wafertex

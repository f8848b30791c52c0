#include "wafertex/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace wafertex {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kContaminationMaskFraction = 0.1;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void check_extent(double cx, double cy, double reach, std::size_t h, std::size_t w, const char* kind) {
    if (cx - reach < -0.5 || cy - reach < -0.5 || cx + reach > static_cast<double>(w) - 0.5 ||
        cy + reach > static_cast<double>(h) - 0.5) {
        throw std::invalid_argument(std::string("inject_anomaly: ") + kind + " support leaves the image");
    }
}

// delta[i] is added wherever mask[i] is set.
struct Footprint {
    std::vector<double> delta;
    Mask mask;
};

Footprint disk_footprint(const AnomalySpec& a, std::size_t h, std::size_t w) {
    if (!(a.radius > 0.0)) throw std::invalid_argument("inject_anomaly: disk radius must be positive");
    check_extent(a.cx, a.cy, a.radius, h, w, "disk");
    Footprint fp{std::vector<double>(h * w, 0.0), Mask(1, h, w)};
    const double r2 = a.radius * a.radius;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - a.cx;
            const double dy = static_cast<double>(y) - a.cy;
            if (dx * dx + dy * dy <= r2) {
                fp.delta[y * w + x] = a.contrast;
                fp.mask[y * w + x] = 1;
            }
        }
    }
    return fp;
}

// Samples the segment on a lattice aligned with its direction and rounds each
// sample to the nearest pixel. Axis-aligned scratches use unit spacing, so a
// thickness-1 scratch of length L covers exactly round(L) pixels; oblique ones
// use half-pixel spacing to avoid holes.
Footprint scratch_footprint(const AnomalySpec& a, std::size_t h, std::size_t w) {
    if (!(a.length > 0.0) || !(a.thickness > 0.0)) {
        throw std::invalid_argument("inject_anomaly: scratch length and thickness must be positive");
    }
    const double dx = std::cos(a.angle);
    const double dy = std::sin(a.angle);
    const bool axis_aligned = std::abs(dx * dy) < 1e-9;
    const double step = axis_aligned ? 1.0 : 0.5;
    const auto along = static_cast<long>(std::max(1.0, std::round(a.length / step)));
    const auto across = static_cast<long>(std::max(1.0, std::round(a.thickness / step)));

    Footprint fp{std::vector<double>(h * w, 0.0), Mask(1, h, w)};
    for (long k = 0; k < along; ++k) {
        const double s = (static_cast<double>(k) - static_cast<double>(along - 1) / 2.0) * step;
        for (long j = 0; j < across; ++j) {
            const double t = (static_cast<double>(j) - static_cast<double>(across - 1) / 2.0) * step;
            const double px = a.cx + s * dx - t * dy;
            const double py = a.cy + s * dy + t * dx;
            const double rx = std::floor(px + 0.5);
            const double ry = std::floor(py + 0.5);
            if (rx < 0.0 || ry < 0.0 || rx >= static_cast<double>(w) || ry >= static_cast<double>(h)) {
                throw std::invalid_argument("inject_anomaly: scratch support leaves the image");
            }
            const auto idx = static_cast<std::size_t>(ry) * w + static_cast<std::size_t>(rx);
            fp.mask[idx] = 1;
            fp.delta[idx] = a.contrast;
        }
    }
    return fp;
}

Footprint contamination_footprint(const AnomalySpec& a, std::size_t h, std::size_t w) {
    if (!(a.softness > 0.0)) throw std::invalid_argument("inject_anomaly: softness must be positive");
    const double reach = a.radius > 0.0 ? a.radius : 3.0 * a.softness;
    check_extent(a.cx, a.cy, reach, h, w, "contamination");
    Footprint fp{std::vector<double>(h * w, 0.0), Mask(1, h, w)};
    const double inv = 1.0 / (2.0 * a.softness * a.softness);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double ddx = static_cast<double>(x) - a.cx;
            const double ddy = static_cast<double>(y) - a.cy;
            const double r2 = ddx * ddx + ddy * ddy;
            if (r2 > reach * reach) continue;
            const double profile = std::exp(-r2 * inv);
            fp.delta[y * w + x] = a.contrast * profile;
            if (profile >= kContaminationMaskFraction) fp.mask[y * w + x] = 1;
        }
    }
    return fp;
}

Footprint footprint(const AnomalySpec& a, std::size_t h, std::size_t w) {
    if (a.contrast == 0.0 || !std::isfinite(a.contrast)) {
        throw std::invalid_argument("inject_anomaly: contrast must be finite and non-zero");
    }
    switch (a.kind) {
        case AnomalyKind::disk: return disk_footprint(a, h, w);
        case AnomalyKind::scratch: return scratch_footprint(a, h, w);
        case AnomalyKind::contamination: return contamination_footprint(a, h, w);
    }
    throw std::invalid_argument("inject_anomaly: unknown anomaly kind");
}

Box tight_box(const Mask& mask) {
    std::size_t x0 = mask.width(), y0 = mask.height(), x1 = 0, y1 = 0;
    bool any = false;
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (mask.at(0, y, x) == 0) continue;
            any = true;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (!any) throw std::invalid_argument("gen_scene: anomaly produced an empty mask");
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
            static_cast<double>(y1 + 1)};
}

}  // namespace

int default_class(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::disk: return 2;           // particle
        case AnomalyKind::scratch: return 5;        // scratch
        case AnomalyKind::contamination: return 4;  // po_contamination
    }
    return 0;
}

Tensor gen_grating(const GratingSpec& spec, std::size_t height, std::size_t width) {
    if (!(spec.period >= 2.0) || !std::isfinite(spec.period)) {
        throw std::invalid_argument("gen_grating: period must be >= 2 pixels");
    }
    const double cx = std::cos(spec.orientation) / spec.period;
    const double cy = std::sin(spec.orientation) / spec.period;
    Tensor out(1, height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double arg = kTwoPi * (static_cast<double>(x) * cx + static_cast<double>(y) * cy) + spec.phase;
            double s = std::sin(arg);
            if (spec.waveform == Waveform::square) s = static_cast<double>((s > 0.0) - (s < 0.0));
            out.at(0, y, x) = static_cast<float>(spec.amplitude * s);
        }
    }
    return out;
}

GratingSpec bin_aligned_grating(int u, int v, std::size_t height, std::size_t width, double amplitude,
                                double phase) {
    const double fx = static_cast<double>(u) / static_cast<double>(width);
    const double fy = static_cast<double>(v) / static_cast<double>(height);
    const double f = std::hypot(fx, fy);
    if (f == 0.0) throw std::invalid_argument("bin_aligned_grating: zero frequency");
    GratingSpec g;
    g.period = 1.0 / f;
    g.orientation = std::atan2(fy, fx);
    g.amplitude = amplitude;
    g.phase = phase;
    return g;
}

InjectedAnomaly inject_anomaly(const Tensor& image, const AnomalySpec& spec) {
    if (image.channels() != 1) throw std::invalid_argument("inject_anomaly: expected a single-channel image");
    Footprint fp = footprint(spec, image.height(), image.width());
    InjectedAnomaly out{image, std::move(fp.mask)};
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (fp.delta[i] != 0.0) out.image[i] = static_cast<float>(static_cast<double>(image[i]) + fp.delta[i]);
    }
    return out;
}

Scene gen_scene(const SceneSpec& spec) {
    if (spec.height == 0 || spec.width == 0) throw std::invalid_argument("gen_scene: empty scene size");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        throw std::invalid_argument("gen_scene: noise_sigma must be finite and >= 0");
    }
    const std::size_t h = spec.height;
    const std::size_t w = spec.width;
    std::vector<double> base(h * w, 0.0);
    for (const auto& g : spec.gratings) {
        const Tensor layer = gen_grating(g, h, w);
        for (std::size_t i = 0; i < base.size(); ++i) base[i] += layer[i];
    }
    Scene scene;
    scene.image = Tensor(1, h, w, std::vector<float>(base.begin(), base.end()));
    scene.mask = Mask(1, h, w);
    for (const auto& a : spec.anomalies) {
        auto injected = inject_anomaly(scene.image, a);
        scene.image = std::move(injected.image);
        for (std::size_t i = 0; i < scene.mask.size(); ++i) scene.mask[i] |= injected.mask[i];
        Detection gt;
        gt.class_id = a.class_id.value_or(default_class(a.kind));
        gt.score = 1.0;
        gt.box = tight_box(injected.mask);
        gt.mask = rle_encode(injected.mask);
        scene.ground_truth.push_back(std::move(gt));
    }
    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.seed);
        for (auto& v : scene.image.data()) {
            const double u1 = 1.0 - unit_uniform(rng);  // (0, 1]
            const double u2 = unit_uniform(rng);
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
            v = static_cast<float>(static_cast<double>(v) + spec.noise_sigma * z);
        }
    }
    return scene;
}

std::vector<SceneSpec> standard_suite(std::size_t size) {
    constexpr std::array<double, 3> contrasts = {0.1, 0.25, 0.5};
    constexpr std::array<AnomalyKind, 3> kinds = {AnomalyKind::disk, AnomalyKind::scratch,
                                                  AnomalyKind::contamination};
    const double n = static_cast<double>(size);
    std::vector<SceneSpec> suite;
    for (const double contrast : contrasts) {
        for (const AnomalyKind kind : kinds) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                SceneSpec spec;
                spec.height = size;
                spec.width = size;
                spec.noise_sigma = 0.01;
                spec.seed = 1000 + seed;
                std::mt19937_64 rng(spec.seed * 7919 + static_cast<std::uint64_t>(kind) * 31 +
                                    static_cast<std::uint64_t>(contrast * 100));
                const auto pick = [&](int lo, int hi) {
                    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
                };
                const int u = pick(static_cast<int>(size / 32), static_cast<int>(size / 8));
                const int v = pick(0, static_cast<int>(size / 32));
                spec.gratings.push_back(bin_aligned_grating(u, v, size, size, 1.0, kTwoPi * unit_uniform(rng)));
                spec.gratings.push_back(bin_aligned_grating(pick(0, 3), pick(static_cast<int>(size / 16),
                                                                             static_cast<int>(size / 6)),
                                                            size, size, 0.5, kTwoPi * unit_uniform(rng)));

                AnomalySpec a;
                a.kind = kind;
                a.contrast = contrast;
                const double margin = 0.2 * n;
                a.cx = margin + unit_uniform(rng) * (n - 2.0 * margin);
                a.cy = margin + unit_uniform(rng) * (n - 2.0 * margin);
                switch (kind) {
                    case AnomalyKind::disk: a.radius = 5.0 + 5.0 * unit_uniform(rng); break;
                    case AnomalyKind::scratch:
                        a.length = 0.12 * n + 0.15 * n * unit_uniform(rng);
                        a.thickness = 2.0 + unit_uniform(rng);
                        a.angle = std::numbers::pi * unit_uniform(rng);
                        break;
                    case AnomalyKind::contamination:
                        a.softness = 4.0 + 4.0 * unit_uniform(rng);
                        a.radius = 0.0;
                        break;
                }
                spec.anomalies.push_back(a);
                suite.push_back(std::move(spec));
            }
        }
    }
    return suite;
}

}  // namespace wafertex

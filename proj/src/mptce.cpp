#include "wafertex/mptce.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>

#include "wafertex/parallel.hpp"
#include "wafertex/rle.hpp"

namespace wafertex {

namespace {

struct BinClass {
    std::size_t u;
    std::size_t v;
    double magnitude;
};

std::size_t partner_u(std::size_t u, std::size_t width) { return (width - u) % width; }
std::size_t partner_v(std::size_t v, std::size_t height) { return (height - v) % height; }

void require_single_channel(const Tensor& t, const char* where) {
    if (t.channels() != 1 || t.empty()) {
        throw std::invalid_argument(std::string(where) + ": expected a non-empty single-channel map, got " +
                                    t.shape_string());
    }
}

std::vector<Complex> unit_roots(std::size_t n) {
    std::vector<Complex> r(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        r[k] = {std::cos(a), std::sin(a)};
    }
    return r;
}

std::vector<double> reconstruct_plane(const SpectrumPeaks& peaks, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw std::invalid_argument("periodic_reconstruct: empty target size");
    if (peaks.height != 0 && (peaks.height != height || peaks.width != width)) {
        throw std::invalid_argument("periodic_reconstruct: peaks come from a " +
                                    std::to_string(peaks.height) + "x" + std::to_string(peaks.width) +
                                    " spectrum, target is " + std::to_string(height) + "x" +
                                    std::to_string(width));
    }
    double largest = 0.0;
    for (const auto& p : peaks.peaks) {
        if (p.u >= width || p.v >= height) {
            throw std::invalid_argument("periodic_reconstruct: peak (" + std::to_string(p.u) + "," +
                                        std::to_string(p.v) + ") outside the frequency grid");
        }
        largest = std::max(largest, std::abs(p.coeff));
    }
    const auto find = [&](std::size_t u, std::size_t v) -> const SpectralPeak* {
        for (const auto& p : peaks.peaks)
            if (p.u == u && p.v == v) return &p;
        return nullptr;
    };
    const double tol = 1e-6 * largest;
    for (std::size_t i = 0; i < peaks.peaks.size(); ++i) {
        const auto& p = peaks.peaks[i];
        for (std::size_t j = i + 1; j < peaks.peaks.size(); ++j) {
            if (peaks.peaks[j].u == p.u && peaks.peaks[j].v == p.v) {
                throw std::invalid_argument("periodic_reconstruct: duplicate peak (" +
                                            std::to_string(p.u) + "," + std::to_string(p.v) + ")");
            }
        }
        const SpectralPeak* q = find(partner_u(p.u, width), partner_v(p.v, height));
        if (q == nullptr || std::abs(p.coeff - std::conj(q->coeff)) > tol) {
            throw std::invalid_argument("periodic_reconstruct: peak (" + std::to_string(p.u) + "," +
                                        std::to_string(p.v) + ") lacks a Hermitian partner");
        }
    }

    const auto row_roots = unit_roots(width);
    const auto col_roots = unit_roots(height);
    const double scale = 1.0 / static_cast<double>(height * width);
    std::vector<double> out(height * width, 0.0);
    double real_norm = 0.0;
    double imag_norm = 0.0;
    std::vector<Complex> row(width);
    for (std::size_t y = 0; y < height; ++y) {
        std::fill(row.begin(), row.end(), Complex{});
        for (const auto& p : peaks.peaks) {
            const Complex cy = p.coeff * col_roots[(p.v * y) % height];
            for (std::size_t x = 0; x < width; ++x) row[x] += cy * row_roots[(p.u * x) % width];
        }
        for (std::size_t x = 0; x < width; ++x) {
            const Complex v = row[x] * scale;
            out[y * width + x] = v.real();
            real_norm += v.real() * v.real();
            imag_norm += v.imag() * v.imag();
        }
    }
    if (std::sqrt(imag_norm) > 1e-5 * std::sqrt(real_norm) + 1e-12) {
        throw std::logic_error("periodic_reconstruct: imaginary residue exceeds tolerance");
    }
    return out;
}

std::vector<double> whole_map_periodic(std::span<const double> plane, std::size_t h, std::size_t w,
                                       const MptceConfig& cfg) {
    const Spectrum s = dft2d(plane, h, w);
    return reconstruct_plane(extract_periodic_peaks(s, cfg), h, w);
}

std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t tile) {
    std::vector<std::size_t> origins;
    const std::size_t hop = tile / 2;
    for (std::size_t o = 0; o + tile <= extent; o += hop) origins.push_back(o);
    if (origins.back() + tile < extent) origins.push_back(extent - tile);
    return origins;
}

std::vector<double> periodic_plane(const Tensor& f, const MptceConfig& cfg) {
    const std::size_t h = f.height();
    const std::size_t w = f.width();
    const std::vector<double> plane(f.data().begin(), f.data().end());
    const std::size_t t = cfg.tile;
    if (t == 0 || t > h || t > w) return whole_map_periodic(plane, h, w, cfg);

    // Shifted periodic Hann: never zero, and pairs at half-tile hop sum to one.
    std::vector<double> window(t);
    for (std::size_t n = 0; n < t; ++n) {
        const double s = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(t));
        window[n] = s * s;
    }
    std::vector<double> numerator(h * w, 0.0);
    std::vector<double> weight(h * w, 0.0);
    std::vector<double> tile_plane(t * t);
    for (const std::size_t oy : tile_origins(h, t)) {
        for (const std::size_t ox : tile_origins(w, t)) {
            for (std::size_t y = 0; y < t; ++y)
                for (std::size_t x = 0; x < t; ++x) tile_plane[y * t + x] = plane[(oy + y) * w + ox + x];
            const auto rec = whole_map_periodic(tile_plane, t, t, cfg);
            for (std::size_t y = 0; y < t; ++y) {
                for (std::size_t x = 0; x < t; ++x) {
                    const double wt = window[y] * window[x];
                    numerator[(oy + y) * w + ox + x] += wt * rec[y * t + x];
                    weight[(oy + y) * w + ox + x] += wt;
                }
            }
        }
    }
    for (std::size_t i = 0; i < numerator.size(); ++i) numerator[i] /= weight[i];
    return numerator;
}

}  // namespace

ConvSpec MptceConfig::box_attention_conv(float bias) {
    ConvSpec spec = ConvSpec::zeros(1, 1, 3, 3, true);
    spec.padding = 1;
    std::fill(spec.weights.begin(), spec.weights.end(), 1.0f / 9.0f);
    spec.bias[0] = bias;
    return spec;
}

void MptceConfig::validate() const {
    if (top_k == 0 && !include_dc) {
        throw std::invalid_argument("mptce: top_k == 0 without DC leaves an empty periodic model");
    }
    if (!std::isfinite(alpha) || alpha < 0.0f) throw std::invalid_argument("mptce: alpha must be finite and >= 0");
    if (tile != 0 && (tile < 4 || (tile & (tile - 1)) != 0)) {
        throw std::invalid_argument("mptce: tile must be 0 or a power of two >= 4");
    }
    bca_conv.validate();
    if (bca_conv.in_channels != 1 || bca_conv.out_channels != 1) {
        throw std::invalid_argument("mptce: bca_conv must map 1 -> 1 channel, got " +
                                    std::to_string(bca_conv.in_channels) + " -> " +
                                    std::to_string(bca_conv.out_channels));
    }
}

SpectrumPeaks extract_periodic_peaks(const Spectrum& s, const MptceConfig& cfg) {
    if (cfg.top_k == 0 && !cfg.include_dc) {
        throw std::invalid_argument("extract_periodic_peaks: top_k == 0 without DC is an empty model");
    }
    const std::size_t H = s.height;
    const std::size_t W = s.width;
    if (H == 0 || W == 0 || s.coeffs.size() != H * W) {
        throw std::invalid_argument("extract_periodic_peaks: malformed spectrum");
    }
    std::vector<BinClass> classes;
    classes.reserve(H * W / 2 + 2);
    for (std::size_t u = 0; u < W; ++u) {
        for (std::size_t v = 0; v < H; ++v) {
            if (u == 0 && v == 0) continue;
            const std::size_t pu = partner_u(u, W);
            const std::size_t pv = partner_v(v, H);
            if (std::tie(u, v) <= std::tie(pu, pv)) classes.push_back({u, v, std::abs(s.at(u, v))});
        }
    }
    if (cfg.top_k > classes.size()) {
        throw std::invalid_argument("extract_periodic_peaks: top_k " + std::to_string(cfg.top_k) +
                                    " exceeds the " + std::to_string(classes.size()) +
                                    " available conjugate pairs");
    }
    const auto order = [](const BinClass& a, const BinClass& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    };
    std::partial_sort(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(cfg.top_k),
                      classes.end(), order);

    SpectrumPeaks out;
    out.height = H;
    out.width = W;
    out.include_dc = cfg.include_dc;
    if (cfg.include_dc) out.peaks.push_back({0, 0, s.at(0, 0)});
    for (std::size_t k = 0; k < cfg.top_k; ++k) {
        const auto& c = classes[k];
        out.peaks.push_back({c.u, c.v, s.at(c.u, c.v)});
        const std::size_t pu = partner_u(c.u, W);
        const std::size_t pv = partner_v(c.v, H);
        if (pu != c.u || pv != c.v) out.peaks.push_back({pu, pv, s.at(pu, pv)});
    }
    return out;
}

Tensor periodic_reconstruct(const SpectrumPeaks& peaks, std::size_t height, std::size_t width) {
    const auto plane = reconstruct_plane(peaks, height, width);
    std::vector<float> data(plane.begin(), plane.end());
    return Tensor(1, height, width, std::move(data));
}

Tensor periodic_component(const Tensor& f, const MptceConfig& cfg) {
    require_single_channel(f, "periodic_component");
    cfg.validate();
    const auto plane = periodic_plane(f, cfg);
    return Tensor(1, f.height(), f.width(), std::vector<float>(plane.begin(), plane.end()));
}

Tensor disturbance_map(const Tensor& f, const MptceConfig& cfg) {
    require_single_channel(f, "disturbance_map");
    cfg.validate();
    const auto periodic = periodic_plane(f, cfg);
    Tensor d(1, f.height(), f.width());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = static_cast<float>(std::abs(static_cast<double>(f[i]) - periodic[i]));
    }
    ensure_finite(d, "disturbance_map");
    return d;
}

Tensor gradient_magnitude(const Tensor& d, GradientKernel kernel) {
    require_single_channel(d, "gradient_magnitude");
    const long H = static_cast<long>(d.height());
    const long W = static_cast<long>(d.width());
    const auto px = [&](long y, long x) -> double {
        y = std::clamp(y, 0L, H - 1);
        x = std::clamp(x, 0L, W - 1);
        return d.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    Tensor out(1, d.height(), d.width());
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            double gx;
            double gy;
            if (kernel == GradientKernel::sobel) {
                gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                     (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
                gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                     (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
            } else {
                gx = 0.5 * (px(y, x + 1) - px(y, x - 1));
                gy = 0.5 * (px(y + 1, x) - px(y - 1, x));
            }
            out.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                static_cast<float>(std::sqrt(gx * gx + gy * gy));
        }
    }
    return out;
}

Tensor boundary_attention(const Tensor& disturbance, const MptceConfig& cfg) {
    require_single_channel(disturbance, "boundary_attention");
    cfg.validate();
    const Tensor boundary = gradient_magnitude(disturbance, cfg.gradient);
    Tensor logits = conv2d(boundary, cfg.bca_conv);
    if (!logits.same_shape(disturbance)) {
        throw std::invalid_argument("boundary_attention: bca_conv changes the map size to " +
                                    logits.shape_string());
    }
    return sigmoid_map(logits);
}

MptceResult mptce_run(const Tensor& features, const MptceConfig& cfg, std::size_t threads) {
    cfg.validate();
    if (features.empty()) throw std::invalid_argument("mptce: empty feature map");
    const std::size_t C = features.channels();
    const std::size_t H = features.height();
    const std::size_t W = features.width();

    std::vector<Tensor> per_channel(C);
    parallel_for(C, threads, [&](std::size_t c) {
        const Tensor plane = slice_channels(features, c, 1);
        per_channel[c] = disturbance_map(plane, cfg);
    });

    MptceResult result;
    if (C == 1) {
        result.disturbance = std::move(per_channel.front());
    } else {
        result.disturbance = Tensor(1, H, W);
        for (std::size_t i = 0; i < H * W; ++i) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += per_channel[c][i];
            result.disturbance[i] = static_cast<float>(acc / static_cast<double>(C));
        }
    }
    result.attention = boundary_attention(result.disturbance, cfg);

    result.enhanced = Tensor(C, H, W);
    const float alpha = cfg.alpha;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H * W; ++i) {
            const float f = features[c * H * W + i];
            result.enhanced[c * H * W + i] = f + alpha * result.attention[i] * f;
        }
    }
    ensure_finite(result.enhanced, "mptce_enhance");
    return result;
}

Tensor mptce_enhance(const Tensor& features, const MptceConfig& cfg, std::size_t threads) {
    return mptce_run(features, cfg, threads).enhanced;
}

std::vector<Detection> disturbance_detections(const Tensor& disturbance, double k_sigma, std::size_t min_area,
                                              int class_id) {
    require_single_channel(disturbance, "disturbance_detections");
    if (!std::isfinite(k_sigma) || k_sigma < 0.0) {
        throw std::invalid_argument("disturbance_detections: k_sigma must be finite and >= 0");
    }
    const std::size_t H = disturbance.height();
    const std::size_t W = disturbance.width();
    const std::size_t N = H * W;
    double sum = 0.0;
    for (const float v : disturbance.data()) sum += v;
    const double mean = sum / static_cast<double>(N);
    double sq = 0.0;
    for (const float v : disturbance.data()) sq += (v - mean) * (v - mean);
    const double threshold = mean + k_sigma * std::sqrt(sq / static_cast<double>(N));

    std::vector<std::uint8_t> visited(N, 0);
    std::vector<std::size_t> stack;
    std::vector<std::size_t> component;
    std::vector<Detection> out;
    for (std::size_t seed = 0; seed < N; ++seed) {
        if (visited[seed] || !(disturbance[seed] > threshold)) continue;
        component.clear();
        stack.assign(1, seed);
        visited[seed] = 1;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            component.push_back(i);
            const std::size_t y = i / W;
            const std::size_t x = i % W;
            const auto visit = [&](std::size_t j) {
                if (!visited[j] && disturbance[j] > threshold) {
                    visited[j] = 1;
                    stack.push_back(j);
                }
            };
            if (x > 0) visit(i - 1);
            if (x + 1 < W) visit(i + 1);
            if (y > 0) visit(i - W);
            if (y + 1 < H) visit(i + W);
        }
        if (component.size() < min_area) continue;
        Mask mask(1, H, W);
        std::size_t x0 = W, y0 = H, x1 = 0, y1 = 0;
        double peak = 0.0;
        for (const std::size_t i : component) {
            mask[i] = 1;
            x0 = std::min(x0, i % W);
            x1 = std::max(x1, i % W);
            y0 = std::min(y0, i / W);
            y1 = std::max(y1, i / W);
            peak = std::max(peak, static_cast<double>(disturbance[i]));
        }
        Detection d;
        d.class_id = class_id;
        d.score = peak;
        d.box = {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
                 static_cast<double>(y1 + 1)};
        d.mask = rle_encode(mask);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace wafertex

#include "wafertex/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace wafertex {

namespace {

constexpr double kSigmoidFloor = 1e-30;

std::string shape_of(std::size_t c, std::size_t h, std::size_t w) {
    return "[" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
}

template <typename T>
T stable_sigmoid(T v) {
    const double x = static_cast<double>(v);
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return static_cast<T>(std::max(s, kSigmoidFloor));
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(std::size_t channels, std::size_t height, std::size_t width, T fill)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(std::size_t channels, std::size_t height, std::size_t width,
                            std::vector<T> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != channels * height * width) {
        throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_of(channels, height, width));
    }
}

template <typename T>
std::string BasicTensor<T>::shape_string() const {
    return shape_of(channels_, height_, width_);
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTensor<unsigned char>;

// ---------------------------------------------------------------------------
// ConvSpec

void ConvSpec::validate() const {
    if (in_channels == 0 || out_channels == 0) throw std::invalid_argument("conv: zero channels");
    if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
        throw std::invalid_argument("conv: channels " + std::to_string(in_channels) + "->" +
                                    std::to_string(out_channels) + " not divisible by groups " +
                                    std::to_string(groups));
    }
    if (kernel_h == 0 || kernel_w == 0) throw std::invalid_argument("conv: empty kernel");
    if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
    if (dilation == 0) throw std::invalid_argument("conv: dilation must be >= 1");
    if (weights.size() != weight_count()) {
        throw std::invalid_argument("conv: expected " + std::to_string(weight_count()) +
                                    " weights, got " + std::to_string(weights.size()));
    }
    if (!bias.empty() && bias.size() != out_channels) {
        throw std::invalid_argument("conv: bias length " + std::to_string(bias.size()) +
                                    " != out_channels " + std::to_string(out_channels));
    }
}

std::size_t ConvSpec::output_height(std::size_t in_h) const {
    const std::size_t span = dilation * (kernel_h - 1) + 1;
    if (in_h + 2 * padding < span) {
        throw std::invalid_argument("conv: kernel extent " + std::to_string(span) +
                                    " exceeds padded height " + std::to_string(in_h + 2 * padding));
    }
    return (in_h + 2 * padding - span) / stride + 1;
}

std::size_t ConvSpec::output_width(std::size_t in_w) const {
    const std::size_t span = dilation * (kernel_w - 1) + 1;
    if (in_w + 2 * padding < span) {
        throw std::invalid_argument("conv: kernel extent " + std::to_string(span) +
                                    " exceeds padded width " + std::to_string(in_w + 2 * padding));
    }
    return (in_w + 2 * padding - span) / stride + 1;
}

ConvSpec ConvSpec::zeros(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                         bool with_bias) {
    ConvSpec spec;
    spec.in_channels = in;
    spec.out_channels = out;
    spec.kernel_h = kh;
    spec.kernel_w = kw;
    spec.weights.assign(spec.weight_count(), 0.0f);
    if (with_bias) spec.bias.assign(out, 0.0f);
    return spec;
}

ConvSpec ConvSpec::seeded(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                          unsigned long long seed, float scale, bool with_bias) {
    ConvSpec spec = zeros(in, out, kh, kw, with_bias);
    std::mt19937_64 rng(seed);
    // Top 53 bits -> [0,1); portable, unlike std::uniform_real_distribution.
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (auto& w : spec.weights) w = static_cast<float>((2.0 * uniform() - 1.0) * scale);
    for (auto& b : spec.bias) b = static_cast<float>((2.0 * uniform() - 1.0) * scale);
    return spec;
}

// ---------------------------------------------------------------------------
// Forward ops

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvSpec& spec) {
    spec.validate();
    if (x.channels() != spec.in_channels) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.channels()) +
                                    " channels, spec expects " + std::to_string(spec.in_channels));
    }
    const std::size_t out_h = spec.output_height(x.height());
    const std::size_t out_w = spec.output_width(x.width());
    const std::size_t in_per_group = spec.in_channels / spec.groups;
    const std::size_t out_per_group = spec.out_channels / spec.groups;
    const auto H = static_cast<long>(x.height());
    const auto W = static_cast<long>(x.width());
    const auto pad = static_cast<long>(spec.padding);

    BasicTensor<T> out(spec.out_channels, out_h, out_w);
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
        const std::size_t g = o / out_per_group;
        const T b = spec.has_bias() ? static_cast<T>(spec.bias[o]) : T{0};
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                T acc = b;
                for (std::size_t i = 0; i < in_per_group; ++i) {
                    const std::size_t ci = g * in_per_group + i;
                    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                        const long iy = static_cast<long>(oy * spec.stride + ky * spec.dilation) - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                            const long ix =
                                static_cast<long>(ox * spec.stride + kx * spec.dilation) - pad;
                            if (ix < 0 || ix >= W) continue;
                            acc += static_cast<T>(spec.weight(o, i, ky, kx)) *
                                   x.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at(o, oy, ox) = acc;
            }
        }
    }
    ensure_finite(out, "conv2d");
    return out;
}

template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& x, std::size_t factor) {
    if (factor == 0) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    BasicTensor<T> out(x.channels(), x.height() * factor, x.width() * factor);
    for (std::size_t c = 0; c < out.channels(); ++c)
        for (std::size_t y = 0; y < out.height(); ++y)
            for (std::size_t xx = 0; xx < out.width(); ++xx)
                out.at(c, y, xx) = x.at(c, y / factor, xx / factor);
    return out;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
    if (x.empty()) throw std::invalid_argument("global_avg_pool: empty tensor " + x.shape_string());
    BasicTensor<T> out(x.channels(), 1, 1);
    const double n = static_cast<double>(x.plane());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (const T v : x.channel(c)) acc += static_cast<double>(v);
        out[c] = static_cast<T>(acc / n);
    }
    return out;
}

template <typename T>
BasicTensor<T> pointwise(const BasicTensor<T>& x, const BasicTensor<T>& y, PointwiseKind kind) {
    const bool broadcast = !x.same_shape(y) && y.channels() == x.channels() && y.height() == 1 &&
                           y.width() == 1;
    if (!x.same_shape(y) && !broadcast) {
        throw std::invalid_argument("pointwise: incompatible shapes " + x.shape_string() + " and " +
                                    y.shape_string());
    }
    BasicTensor<T> out(x.channels(), x.height(), x.width());
    const std::size_t plane = x.plane();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T b = broadcast ? y[i / plane] : y[i];
        out[i] = kind == PointwiseKind::add ? x[i] + b : x[i] * b;
    }
    ensure_finite(out, "pointwise");
    return out;
}

template <typename T>
BasicTensor<T> sigmoid_map(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.channels(), x.height(), x.width());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
    return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to concatenate");
    const std::size_t h = parts.front().height();
    const std::size_t w = parts.front().width();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.height() != h || p.width() != w) {
            throw std::invalid_argument("concat_channels: spatial mismatch " +
                                        parts.front().shape_string() + " vs " + p.shape_string());
        }
        total += p.channels();
    }
    std::vector<T> data;
    data.reserve(total * h * w);
    for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    return BasicTensor<T>(total, h, w, std::move(data));
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t first, std::size_t count) {
    if (first + count > x.channels()) {
        throw std::invalid_argument("slice_channels: range exceeds " + x.shape_string());
    }
    const auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(first * x.plane());
    std::vector<T> data(begin, begin + static_cast<std::ptrdiff_t>(count * x.plane()));
    return BasicTensor<T>(count, x.height(), x.width(), std::move(data));
}

// ---------------------------------------------------------------------------
// Backward ops

template <typename T>
BasicTensor<T> conv2d_backward_input(const BasicTensor<T>& grad_out, const ConvSpec& spec,
                                     std::size_t in_h, std::size_t in_w) {
    spec.validate();
    const std::size_t out_h = spec.output_height(in_h);
    const std::size_t out_w = spec.output_width(in_w);
    if (grad_out.channels() != spec.out_channels || grad_out.height() != out_h ||
        grad_out.width() != out_w) {
        throw std::invalid_argument("conv2d_backward_input: gradient shape " +
                                    grad_out.shape_string() + " does not match conv output " +
                                    shape_of(spec.out_channels, out_h, out_w));
    }
    const std::size_t in_per_group = spec.in_channels / spec.groups;
    const std::size_t out_per_group = spec.out_channels / spec.groups;
    const auto pad = static_cast<long>(spec.padding);
    BasicTensor<T> grad_in(spec.in_channels, in_h, in_w);
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
        const std::size_t g = o / out_per_group;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const T go = grad_out.at(o, oy, ox);
                for (std::size_t i = 0; i < in_per_group; ++i) {
                    const std::size_t ci = g * in_per_group + i;
                    for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                        const long iy = static_cast<long>(oy * spec.stride + ky * spec.dilation) - pad;
                        if (iy < 0 || iy >= static_cast<long>(in_h)) continue;
                        for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                            const long ix =
                                static_cast<long>(ox * spec.stride + kx * spec.dilation) - pad;
                            if (ix < 0 || ix >= static_cast<long>(in_w)) continue;
                            grad_in.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                                static_cast<T>(spec.weight(o, i, ky, kx)) * go;
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, std::size_t in_h,
                                        std::size_t in_w) {
    if (grad_out.height() != 1 || grad_out.width() != 1) {
        throw std::invalid_argument("global_avg_pool_backward: expected [C,1,1], got " +
                                    grad_out.shape_string());
    }
    BasicTensor<T> grad_in(grad_out.channels(), in_h, in_w);
    const T scale = T{1} / static_cast<T>(in_h * in_w);
    for (std::size_t c = 0; c < grad_out.channels(); ++c)
        for (auto& v : grad_in.channel(c)) v = grad_out[c] * scale;
    return grad_in;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> pointwise_backward(const BasicTensor<T>& x,
                                                             const BasicTensor<T>& y,
                                                             PointwiseKind kind,
                                                             const BasicTensor<T>& grad_out) {
    if (!grad_out.same_shape(x)) {
        throw std::invalid_argument("pointwise_backward: gradient shape " + grad_out.shape_string() +
                                    " != input shape " + x.shape_string());
    }
    const bool broadcast = !x.same_shape(y);
    const std::size_t plane = x.plane();
    BasicTensor<T> gx(x.channels(), x.height(), x.width());
    BasicTensor<T> gy(y.channels(), y.height(), y.width());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t j = broadcast ? i / plane : i;
        if (kind == PointwiseKind::add) {
            gx[i] = grad_out[i];
            gy[j] += grad_out[i];
        } else {
            gx[i] = grad_out[i] * y[j];
            gy[j] += grad_out[i] * x[i];
        }
    }
    return {std::move(gx), std::move(gy)};
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out) {
    if (!out.same_shape(grad_out)) throw std::invalid_argument("sigmoid_backward: shape mismatch");
    BasicTensor<T> g(out.channels(), out.height(), out.width());
    for (std::size_t i = 0; i < out.size(); ++i) g[i] = grad_out[i] * out[i] * (T{1} - out[i]);
    return g;
}

template <typename T>
void ensure_finite(const BasicTensor<T>& x, const char* where) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(static_cast<double>(x[i]))) {
            const std::size_t c = i / x.plane();
            const std::size_t y = (i % x.plane()) / x.width();
            const std::size_t xx = i % x.width();
            throw std::domain_error(std::string(where) + ": non-finite value at (c=" +
                                    std::to_string(c) + ", y=" + std::to_string(y) +
                                    ", x=" + std::to_string(xx) + ")");
        }
    }
}

#define WAFERTEX_INSTANTIATE(T)                                                                  \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const ConvSpec&);                      \
    template BasicTensor<T> upsample_nearest(const BasicTensor<T>&, std::size_t);                \
    template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                              \
    template BasicTensor<T> pointwise(const BasicTensor<T>&, const BasicTensor<T>&, PointwiseKind); \
    template BasicTensor<T> sigmoid_map(const BasicTensor<T>&);                                  \
    template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);                    \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::size_t, std::size_t);     \
    template BasicTensor<T> conv2d_backward_input(const BasicTensor<T>&, const ConvSpec&,        \
                                                  std::size_t, std::size_t);                     \
    template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, std::size_t,         \
                                                     std::size_t);                               \
    template std::pair<BasicTensor<T>, BasicTensor<T>> pointwise_backward(                       \
        const BasicTensor<T>&, const BasicTensor<T>&, PointwiseKind, const BasicTensor<T>&);     \
    template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);      \
    template void ensure_finite(const BasicTensor<T>&, const char*);

WAFERTEX_INSTANTIATE(float)
WAFERTEX_INSTANTIATE(double)

#undef WAFERTEX_INSTANTIATE

}  // namespace wafertex

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wafertex {

// Dense [channels, height, width] feature map, channel-major then row-major.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    BasicTensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0});
    BasicTensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data);

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t plane() const { return height_ * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * height_ + y) * width_ + x]; }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * height_ + y) * width_ + x];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::span<T> channel(std::size_t c) { return std::span<T>(data_).subspan(c * plane(), plane()); }
    std::span<const T> channel(std::size_t c) const {
        return std::span<const T>(data_).subspan(c * plane(), plane());
    }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const BasicTensor& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    std::string shape_string() const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(channels_, height_, width_, std::move(out));
    }

    bool operator==(const BasicTensor&) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;
// Binary map stored as 0/1 bytes; single channel.
using Mask = BasicTensor<std::uint8_t>;

// Convolution layer description. Weights are [out, in/groups, kh, kw]; an
// empty bias vector means the layer has no bias term.
struct ConvSpec {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
    std::size_t groups = 1;
    std::vector<float> weights;
    std::vector<float> bias;

    void validate() const;
    std::size_t weight_count() const { return out_channels * (in_channels / groups) * kernel_h * kernel_w; }
    bool has_bias() const { return !bias.empty(); }
    float weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return weights[((o * (in_channels / groups) + i) * kernel_h + ky) * kernel_w + kx];
    }
    std::size_t output_height(std::size_t in_h) const;
    std::size_t output_width(std::size_t in_w) const;

    // All-zero weights of the right shape; bias present (zeros) when with_bias.
    static ConvSpec zeros(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                          bool with_bias = false);
    // Deterministic uniform weights in [-scale, scale] from a 64-bit Mersenne Twister.
    static ConvSpec seeded(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                           unsigned long long seed, float scale = 0.1f, bool with_bias = true);
};

enum class PointwiseKind { add, mul };

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvSpec& spec);

template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& x, std::size_t factor);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

// y may equal x's shape or be [C,1,1], in which case it broadcasts over H x W.
template <typename T>
BasicTensor<T> pointwise(const BasicTensor<T>& x, const BasicTensor<T>& y, PointwiseKind kind);

template <typename T>
BasicTensor<T> sigmoid_map(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t first, std::size_t count);

// Backward passes (vector-Jacobian products with respect to the input).
template <typename T>
BasicTensor<T> conv2d_backward_input(const BasicTensor<T>& grad_out, const ConvSpec& spec,
                                     std::size_t in_h, std::size_t in_w);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, std::size_t in_h,
                                        std::size_t in_w);

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> pointwise_backward(const BasicTensor<T>& x,
                                                             const BasicTensor<T>& y,
                                                             PointwiseKind kind,
                                                             const BasicTensor<T>& grad_out);

// Takes the forward *output* of sigmoid_map.
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& out, const BasicTensor<T>& grad_out);

// Throws std::domain_error naming the first non-finite coordinate.
template <typename T>
void ensure_finite(const BasicTensor<T>& x, const char* where);

}  // namespace wafertex

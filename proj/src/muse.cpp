#include "wafertex/muse.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace wafertex {

namespace {

template <typename Fn>
auto in_branch(const char* branch, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("muse[") + branch + "]: " + e.what());
    } catch (const std::domain_error& e) {
        throw std::domain_error(std::string("muse[") + branch + "]: " + e.what());
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("muse: " + what);
}

template <typename T>
struct MuseTrace {
    BasicTensor<T> x_ctx;
    BasicTensor<T> pooled;
    BasicTensor<T> gate;
    BasicTensor<T> gated;
};

template <typename T>
MuseTrace<T> run_forward(const BasicTensor<T>& x, const MuseBlock& block) {
    block.validate();
    if (x.channels() != block.in_channels()) {
        throw std::invalid_argument("muse: input has " + std::to_string(x.channels()) +
                                    " channels, block expects " + std::to_string(block.in_channels()));
    }
    MuseTrace<T> t;
    const auto local = in_branch("local", [&] { return conv2d(x, block.local); });
    const auto surround = in_branch("surround", [&] { return conv2d(x, block.surround); });
    const std::array<BasicTensor<T>, 2> parts = {local, surround};
    t.x_ctx = concat_channels<T>(parts);
    t.pooled = global_avg_pool(t.x_ctx);
    t.gate = in_branch("effective_se", [&] { return sigmoid_map(conv2d(t.pooled, block.se_conv)); });
    t.gated = pointwise(t.x_ctx, t.gate, PointwiseKind::mul);
    return t;
}

}  // namespace

void MuseBlock::validate() const {
    in_branch("local", [&] { local.validate(); return 0; });
    in_branch("surround", [&] { surround.validate(); return 0; });
    in_branch("effective_se", [&] { se_conv.validate(); return 0; });
    require(local.kernel_h == 3 && local.kernel_w == 3 && local.dilation == 1 && local.padding == 1 &&
                local.stride == 1,
            "local branch must be 3x3, dilation 1, padding 1, stride 1");
    require(surround.kernel_h == 3 && surround.kernel_w == 3 && surround.dilation == 2 &&
                surround.padding == 2 && surround.stride == 1,
            "surround branch must be 3x3, dilation 2, padding 2, stride 1");
    require(local.in_channels == surround.in_channels, "branches disagree on input channels");
    require(local.out_channels == surround.out_channels, "branches disagree on output channels");
    require(se_conv.kernel_h == 1 && se_conv.kernel_w == 1 && se_conv.stride == 1 && se_conv.padding == 0,
            "se_conv must be a 1x1 conv");
    require(se_conv.in_channels == context_channels() && se_conv.out_channels == context_channels(),
            "se_conv must map " + std::to_string(context_channels()) + " -> " +
                std::to_string(context_channels()) + " channels");
    if (projection) {
        in_branch("projection", [&] { projection->validate(); return 0; });
        require(projection->kernel_h == 1 && projection->kernel_w == 1 && projection->padding == 0 &&
                    projection->stride == 1 && projection->in_channels == context_channels(),
                "projection must be a 1x1 conv over the context channels");
    }
}

MuseBlock MuseBlock::seeded(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed,
                            std::size_t se_groups) {
    require(out_channels >= 2 && out_channels % 2 == 0, "out_channels must be even and >= 2");
    const std::size_t half = out_channels / 2;
    MuseBlock block;
    block.local = ConvSpec::seeded(in_channels, half, 3, 3, seed);
    block.local.padding = 1;
    block.surround = ConvSpec::seeded(in_channels, half, 3, 3, seed + 1);
    block.surround.padding = 2;
    block.surround.dilation = 2;
    const std::size_t groups = se_groups == 0 ? out_channels : se_groups;
    require(out_channels % groups == 0, "se groups must divide out_channels");
    ConvSpec se = ConvSpec::zeros(out_channels, out_channels, 1, 1, true);
    se.groups = groups;
    const ConvSpec init = ConvSpec::seeded(out_channels / groups, out_channels, 1, 1, seed + 2);
    se.weights = init.weights;
    se.bias = init.bias;
    block.se_conv = std::move(se);
    return block;
}

template <typename T>
BasicTensor<T> effective_se(const BasicTensor<T>& x_ctx, const ConvSpec& se_conv) {
    if (x_ctx.channels() != se_conv.in_channels) {
        throw std::invalid_argument("effective_se: input has " + std::to_string(x_ctx.channels()) +
                                    " channels, se_conv expects " + std::to_string(se_conv.in_channels));
    }
    if (se_conv.kernel_h != 1 || se_conv.kernel_w != 1 || se_conv.in_channels != se_conv.out_channels) {
        throw std::invalid_argument("effective_se: se_conv must be a square 1x1 conv");
    }
    return sigmoid_map(conv2d(global_avg_pool(x_ctx), se_conv));
}

template <typename T>
BasicTensor<T> muse_forward(const BasicTensor<T>& x, const MuseBlock& block) {
    auto trace = run_forward(x, block);
    if (block.projection) {
        return in_branch("projection", [&] { return conv2d(trace.gated, *block.projection); });
    }
    return std::move(trace.gated);
}

TensorD muse_backward(const TensorD& x, const MuseBlock& block, const TensorD& grad_out) {
    const auto t = run_forward(x, block);
    TensorD g_gated = block.projection
                          ? conv2d_backward_input(grad_out, *block.projection, x.height(), x.width())
                          : grad_out;
    // gated = x_ctx * gate (broadcast)
    auto [g_ctx, g_gate] = pointwise_backward(t.x_ctx, t.gate, PointwiseKind::mul, g_gated);
    const TensorD g_logits = sigmoid_backward(t.gate, g_gate);
    const TensorD g_pooled = conv2d_backward_input(g_logits, block.se_conv, 1, 1);
    const TensorD g_ctx_from_gap = global_avg_pool_backward(g_pooled, x.height(), x.width());
    g_ctx = pointwise(g_ctx, g_ctx_from_gap, PointwiseKind::add);

    const std::size_t half = block.local.out_channels;
    const TensorD g_local = slice_channels(g_ctx, 0, half);
    const TensorD g_surround = slice_channels(g_ctx, half, block.surround.out_channels);
    return pointwise(conv2d_backward_input(g_local, block.local, x.height(), x.width()),
                     conv2d_backward_input(g_surround, block.surround, x.height(), x.width()),
                     PointwiseKind::add);
}

DifferentiableOp muse_op(const MuseBlock& block) {
    return {"muse_forward",
            [block](const TensorD& x) { return muse_forward(x, block); },
            [block](const TensorD& x, const TensorD& g) { return muse_backward(x, block, g); }};
}

template BasicTensor<float> effective_se(const BasicTensor<float>&, const ConvSpec&);
template BasicTensor<double> effective_se(const BasicTensor<double>&, const ConvSpec&);
template BasicTensor<float> muse_forward(const BasicTensor<float>&, const MuseBlock&);
template BasicTensor<double> muse_forward(const BasicTensor<double>&, const MuseBlock&);

}  // namespace wafertex

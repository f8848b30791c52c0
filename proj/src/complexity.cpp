#include "wafertex/complexity.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace wafertex {

namespace {

struct ConvShape {
    std::size_t in, out, kernel, stride, padding, groups;
    bool bias;
};

LayerCost conv_cost(const ConvShape& c, std::size_t size) {
    if (c.groups == 0 || c.in % c.groups != 0 || c.out % c.groups != 0) {
        throw std::invalid_argument("count_params_flops: channels not divisible by groups");
    }
    if (c.stride == 0 || size + 2 * c.padding < c.kernel) {
        throw std::invalid_argument("count_params_flops: kernel larger than padded input");
    }
    const std::uint64_t macs_per_pixel = static_cast<std::uint64_t>(c.out) * (c.in / c.groups) * c.kernel * c.kernel;
    LayerCost cost;
    cost.output_size = (size + 2 * c.padding - c.kernel) / c.stride + 1;
    cost.params = macs_per_pixel + (c.bias ? c.out : 0);
    cost.flops = 2 * macs_per_pixel * cost.output_size * cost.output_size;
    return cost;
}

void accumulate(LayerCost& total, const LayerCost& part) {
    total.params += part.params;
    total.flops += part.flops;
}

LayerCost muse_cost(std::size_t in, std::size_t out, std::size_t size) {
    if (out % 2 != 0) throw std::invalid_argument("count_params_flops: muse width must be even");
    LayerCost cost;
    cost.output_size = size;
    accumulate(cost, conv_cost({in, out / 2, 3, 1, 1, 1, true}, size));  // local
    accumulate(cost, conv_cost({in, out / 2, 3, 1, 1, 1, true}, size));  // dilated, same cost
    accumulate(cost, conv_cost({out, out, 1, 1, 0, out, true}, 1));      // grouped 1x1 SE
    cost.flops += 2ull * out * size * size;                               // GAP + reweighting
    return cost;
}

LayerCost c2f_cost(const LayerDescriptor& l, bool with_muse) {
    const std::size_t hidden = l.out_channels / 2;
    LayerCost cost;
    cost.output_size = l.input_size;
    accumulate(cost, conv_cost({l.in_channels, 2 * hidden, 1, 1, 0, 1, l.bias}, l.input_size));
    for (std::size_t i = 0; i < l.repeats; ++i) {
        if (with_muse) {
            accumulate(cost, muse_cost(hidden, hidden, l.input_size));
        } else {
            accumulate(cost, conv_cost({hidden, hidden, 3, 1, 1, 1, l.bias}, l.input_size));
            accumulate(cost, conv_cost({hidden, hidden, 3, 1, 1, 1, l.bias}, l.input_size));
        }
    }
    accumulate(cost, conv_cost({(2 + l.repeats) * hidden, l.out_channels, 1, 1, 0, 1, l.bias}, l.input_size));
    return cost;
}

// Frequency-domain block: BCA conv (3x3, 1 -> 1, bias) plus the gate strength.
// FLOPs are an estimate: per channel a 5 N log2 N forward transform, an
// 8-FLOP complex multiply-add per retained bin (DC + 8 pairs) and pixel, and
// the residual; then Sobel, box conv, sigmoid and the gate.
LayerCost mptce_cost(std::size_t channels, std::size_t size) {
    const double n = static_cast<double>(size) * static_cast<double>(size);
    const double per_channel = 5.0 * n * std::log2(n) + 8.0 * 17.0 * n + 2.0 * n;
    LayerCost cost;
    cost.output_size = size;
    cost.params = 9 + 1 + 1;
    cost.flops = static_cast<std::uint64_t>(std::llround(per_channel * static_cast<double>(channels) +
                                                          (24.0 + 18.0 + 4.0) * n +
                                                          3.0 * static_cast<double>(channels) * n));
    return cost;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument("layer descriptor: bad value '" + std::string(value) + "' for " +
                                    std::string(key));
    }
    return out;
}

LayerDescriptor conv_row(std::size_t in, std::size_t out, std::size_t k, std::size_t s, std::size_t size,
                         std::string label, std::size_t groups = 1) {
    LayerDescriptor d;
    d.kind = groups > 1 ? "dwconv" : "conv";
    d.in_channels = in;
    d.out_channels = out;
    d.kernel = k;
    d.stride = s;
    d.padding = k / 2;
    d.groups = groups;
    d.input_size = size;
    d.label = std::move(label);
    return d;
}

LayerDescriptor block_row(std::string kind, std::size_t in, std::size_t out, std::size_t n, std::size_t size,
                          std::string label) {
    LayerDescriptor d;
    d.kind = std::move(kind);
    d.in_channels = in;
    d.out_channels = out;
    d.repeats = n;
    d.input_size = size;
    d.label = std::move(label);
    return d;
}

}  // namespace

LayerCost layer_cost(const LayerDescriptor& l) {
    if (l.input_size == 0) throw std::invalid_argument("count_params_flops: " + l.kind + " has no input size");
    if (l.kind == "conv") {
        return conv_cost({l.in_channels, l.out_channels, l.kernel, l.stride, l.padding, l.groups, l.bias},
                         l.input_size);
    }
    if (l.kind == "dwconv") {
        return conv_cost({l.in_channels, l.out_channels, l.kernel, l.stride, l.padding, l.in_channels, l.bias},
                         l.input_size);
    }
    if (l.kind == "c2f") return c2f_cost(l, false);
    if (l.kind == "c2f_muse") return c2f_cost(l, true);
    if (l.kind == "muse") return muse_cost(l.in_channels, l.out_channels, l.input_size);
    if (l.kind == "effective_se") {
        LayerCost cost = conv_cost({l.in_channels, l.in_channels, 1, 1, 0, l.groups, true}, 1);
        cost.output_size = l.input_size;
        cost.flops += 2ull * l.in_channels * l.input_size * l.input_size;
        return cost;
    }
    if (l.kind == "mptce") return mptce_cost(l.in_channels, l.input_size);
    if (l.kind == "sppf") {
        LayerCost cost;
        cost.output_size = l.input_size;
        accumulate(cost, conv_cost({l.in_channels, l.in_channels / 2, 1, 1, 0, 1, l.bias}, l.input_size));
        accumulate(cost, conv_cost({2 * l.in_channels, l.out_channels, 1, 1, 0, 1, l.bias}, l.input_size));
        return cost;
    }
    if (l.kind == "upsample") return {0, 0, l.input_size * std::max<std::size_t>(l.stride, 1)};
    if (l.kind == "concat") return {0, 0, l.input_size};
    throw std::invalid_argument("count_params_flops: unknown layer kind '" + l.kind + "'");
}

ComplexityTotals count_params_flops(std::span<const LayerDescriptor> layers) {
    ComplexityTotals totals;
    for (const auto& l : layers) {
        const LayerCost c = layer_cost(l);
        totals.params += c.params;
        totals.flops += c.flops;
        totals.layers.push_back(c);
    }
    return totals;
}

LayerDescriptor parse_layer(std::string_view text) {
    std::istringstream in{std::string(text)};
    LayerDescriptor d;
    if (!(in >> d.kind)) throw std::invalid_argument("layer descriptor: empty");
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("layer descriptor: expected key=value, got '" + token + "'");
        const std::string key = token.substr(0, eq);
        const std::string_view value = std::string_view(token).substr(eq + 1);
        if (key == "in") d.in_channels = parse_count(key, value);
        else if (key == "out") d.out_channels = parse_count(key, value);
        else if (key == "k") d.kernel = parse_count(key, value);
        else if (key == "s") d.stride = parse_count(key, value);
        else if (key == "p") d.padding = parse_count(key, value);
        else if (key == "g") d.groups = parse_count(key, value);
        else if (key == "n") d.repeats = parse_count(key, value);
        else if (key == "size") d.input_size = parse_count(key, value);
        else if (key == "bias") d.bias = parse_count(key, value) != 0;
        else if (key == "label") d.label = std::string(value);
        else throw std::invalid_argument("layer descriptor: unknown key '" + key + "'");
    }
    if (d.out_channels == 0) d.out_channels = d.in_channels;
    return d;
}

std::vector<LayerDescriptor> reference_layer_table() {
    std::vector<LayerDescriptor> t;
    t.push_back(conv_row(3, 64, 3, 2, 640, "backbone.conv0"));
    t.push_back(conv_row(64, 128, 3, 2, 320, "backbone.conv1"));
    t.push_back(block_row("c2f_muse", 128, 128, 3, 160, "backbone.c2f_muse2"));
    t.push_back(conv_row(128, 256, 3, 2, 160, "backbone.conv3"));
    t.push_back(block_row("c2f_muse", 256, 256, 6, 80, "backbone.c2f_muse4"));
    t.push_back(conv_row(256, 512, 3, 2, 80, "backbone.conv5"));
    t.push_back(block_row("c2f_muse", 512, 512, 6, 40, "backbone.c2f_muse6"));
    t.push_back(conv_row(512, 1024, 3, 2, 40, "backbone.conv7"));
    t.push_back(block_row("c2f", 1024, 1024, 2, 20, "backbone.c2f8"));
    t.push_back(block_row("sppf", 1024, 1024, 1, 20, "backbone.sppf9"));
    LayerDescriptor up = block_row("upsample", 1024, 1024, 1, 20, "neck.up10");
    up.stride = 2;
    t.push_back(up);
    t.push_back(block_row("concat", 1536, 1536, 1, 40, "neck.cat11"));
    t.push_back(block_row("c2f_muse", 1536, 512, 3, 40, "neck.c2f_muse12"));
    up = block_row("upsample", 512, 512, 1, 40, "neck.up13");
    up.stride = 2;
    t.push_back(up);
    t.push_back(block_row("concat", 768, 768, 1, 80, "neck.cat14"));
    t.push_back(block_row("c2f_muse", 768, 256, 3, 80, "neck.c2f_muse15"));
    up = block_row("upsample", 256, 256, 1, 80, "neck.up16");
    up.stride = 2;
    t.push_back(up);
    t.push_back(block_row("concat", 384, 384, 1, 160, "neck.cat17"));
    t.push_back(block_row("c2f_muse", 384, 128, 3, 160, "neck.c2f_muse18_p2"));
    t.push_back(conv_row(128, 128, 3, 2, 160, "neck.down19"));
    t.push_back(block_row("concat", 384, 384, 1, 80, "neck.cat20"));
    t.push_back(block_row("c2f_muse", 384, 256, 3, 80, "neck.c2f_muse21"));
    t.push_back(block_row("mptce", 256, 256, 1, 80, "neck.mptce22"));
    t.push_back(conv_row(256, 256, 3, 2, 80, "neck.down23"));
    t.push_back(block_row("concat", 768, 768, 1, 40, "neck.cat24"));
    t.push_back(block_row("c2f_muse", 768, 512, 2, 40, "neck.muse25"));
    t.push_back(conv_row(512, 512, 3, 2, 40, "neck.down26"));
    t.push_back(block_row("concat", 1536, 1536, 1, 20, "neck.cat27"));
    t.push_back(block_row("c2f_muse", 1536, 1024, 3, 20, "neck.c2f_muse28"));
    t.push_back(conv_row(1024, 1024, 1, 1, 20, "head.conv1x1"));
    t.push_back(conv_row(1024, 1024, 3, 1, 20, "head.dwconv", 1024));
    up = block_row("upsample", 1024, 1024, 1, 20, "head.up");
    up.stride = 2;
    t.push_back(up);
    t.push_back(conv_row(1024, 1024, 3, 1, 40, "head.conv3x3"));
    LayerDescriptor se = block_row("effective_se", 1024, 1024, 1, 20, "head.effective_se");
    t.push_back(se);
    return t;
}

}  // namespace wafertex

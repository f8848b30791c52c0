#include "wafertex/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace wafertex {

namespace {

double contract(const TensorD& u, const TensorD& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += u[i] * y[i];
    return acc;
}

TensorD checked_forward(const DifferentiableOp& op, const TensorD& x, const char* phase) {
    TensorD y = op.forward(x);
    ensure_finite(y, (op.name + " " + phase).c_str());
    return y;
}

}  // namespace

GradCheckResult grad_check(const DifferentiableOp& op, const TensorD& x, const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    if (x.empty()) throw std::invalid_argument("grad_check: empty input");
    ensure_finite(x, "grad_check input");

    std::mt19937_64 rng(opts.seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    const TensorD y0 = checked_forward(op, x, "forward");
    // Cotangent entries bounded away from zero so relative errors stay meaningful.
    TensorD u(y0.channels(), y0.height(), y0.width());
    for (auto& v : u.data()) v = (uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + uniform());

    const TensorD grad = op.backward(x, u);
    if (!grad.same_shape(x)) {
        throw std::logic_error("grad_check: " + op.name + " backward returned " + grad.shape_string() +
                               " for input " + x.shape_string());
    }
    ensure_finite(grad, (op.name + " backward").c_str());

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.samples < coords.size()) {
        for (std::size_t k = 0; k < opts.samples; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng() % (coords.size() - k));
            std::swap(coords[k], coords[j]);
        }
        coords.resize(opts.samples);
    }

    GradCheckResult result;
    TensorD probe = x;
    for (const std::size_t i : coords) {
        const double base = probe[i];
        probe[i] = base + opts.eps;
        const double plus = contract(u, checked_forward(op, probe, "forward(+eps)"));
        probe[i] = base - opts.eps;
        const double minus = contract(u, checked_forward(op, probe, "forward(-eps)"));
        probe[i] = base;
        const double fd = (plus - minus) / (2.0 * opts.eps);
        if (!std::isfinite(fd)) {
            throw std::domain_error("grad_check: " + op.name +
                                    " non-finite finite difference at index " + std::to_string(i));
        }
        const double err = std::abs(grad[i] - fd) / (std::abs(fd) + 1e-8);
        if (result.probes == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
        }
        ++result.probes;
    }
    return result;
}

DifferentiableOp conv2d_op(const ConvSpec& spec) {
    return {"conv2d",
            [spec](const TensorD& x) { return conv2d(x, spec); },
            [spec](const TensorD& x, const TensorD& g) {
                return conv2d_backward_input(g, spec, x.height(), x.width());
            }};
}

DifferentiableOp pointwise_op(const TensorD& other, PointwiseKind kind) {
    return {kind == PointwiseKind::add ? "pointwise(add)" : "pointwise(mul)",
            [other, kind](const TensorD& x) { return pointwise(x, other, kind); },
            [other, kind](const TensorD& x, const TensorD& g) {
                return pointwise_backward(x, other, kind, g).first;
            }};
}

DifferentiableOp sigmoid_op() {
    return {"sigmoid_map",
            [](const TensorD& x) { return sigmoid_map(x); },
            [](const TensorD& x, const TensorD& g) { return sigmoid_backward(sigmoid_map(x), g); }};
}

DifferentiableOp global_avg_pool_op() {
    return {"global_avg_pool",
            [](const TensorD& x) { return global_avg_pool(x); },
            [](const TensorD& x, const TensorD& g) {
                return global_avg_pool_backward(g, x.height(), x.width());
            }};
}

}  // namespace wafertex

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "wafertex/tensors.hpp"

namespace wafertex {

// A Tensor->Tensor map together with its vector-Jacobian product.
struct DifferentiableOp {
    std::string name;
    std::function<TensorD(const TensorD&)> forward;
    // (input, gradient w.r.t. output) -> gradient w.r.t. input
    std::function<TensorD(const TensorD&, const TensorD&)> backward;
};

struct GradCheckOptions {
    double eps = 1e-4;
    std::size_t samples = 32;   // input coordinates probed; all of them if the input is smaller
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t probes = 0;
};

// Contracts the output with a fixed random cotangent u and compares the
// analytic u^T J e_i against the central difference of <u, op(x)> along e_i.
// Error per probe is |analytic - fd| / (|fd| + 1e-8).
GradCheckResult grad_check(const DifferentiableOp& op, const TensorD& x, const GradCheckOptions& opts);

// Standard handles for the differentiable primitives.
DifferentiableOp conv2d_op(const ConvSpec& spec);
DifferentiableOp pointwise_op(const TensorD& other, PointwiseKind kind);
DifferentiableOp sigmoid_op();
DifferentiableOp global_avg_pool_op();

}  // namespace wafertex

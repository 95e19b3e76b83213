#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dstlab/tensor.hpp"

namespace dstlab {

// Bias-corrected Adam. The optimizer always minimizes; callers wanting
// ascent negate the gradients.
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;
    AdamConfig cfg;
};

AdamState make_adam_state(std::span<const Tensor* const> params, AdamConfig cfg = {});

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state, double lr);

// Central finite differences, (f(p+eps) - f(p-eps)) / (2 eps) per coordinate.
// Restores every parameter exactly; throws on a non-finite evaluation.
std::vector<Tensor> finite_difference_gradient(const std::function<double()>& f,
                                               std::span<Tensor* const> params,
                                               double epsilon);

}  // namespace dstlab

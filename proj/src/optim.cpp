#include "dstlab/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "dstlab/kernels.hpp"

namespace dstlab {

AdamState make_adam_state(std::span<const Tensor* const> params, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape()));
        s.v.push_back(Tensor::zeros(p->shape()));
    }
    return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state, double lr) {
    if (!(lr > 0.0)) {
        throw std::invalid_argument("adam_step: learning rate must be positive");
    }
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m[i])) {
            throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
        }
    }
    state.t += 1;
    const double c1 = 1.0 / (1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t)));
    const double c2 = 1.0 / (1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t)));
    const auto& K = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        K.adam_update(params[i]->data(), grads[i].data(), state.m[i].data(), state.v[i].data(),
                      static_cast<std::size_t>(params[i]->size()),
                      lr, state.cfg.beta1, state.cfg.beta2, state.cfg.eps, c1, c2);
    }
}

std::vector<Tensor> finite_difference_gradient(const std::function<double()>& f,
                                               std::span<Tensor* const> params,
                                               double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("finite_difference_gradient: epsilon must be positive");
    }
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Tensor* p : params) {
        Tensor g = Tensor::zeros(p->shape());
        for (std::int64_t i = 0; i < p->size(); ++i) {
            const double saved = (*p)[static_cast<std::size_t>(i)];
            (*p)[static_cast<std::size_t>(i)] = saved + epsilon;
            const double hi = f();
            (*p)[static_cast<std::size_t>(i)] = saved - epsilon;
            const double lo = f();
            (*p)[static_cast<std::size_t>(i)] = saved;
            if (!std::isfinite(hi) || !std::isfinite(lo)) {
                throw std::runtime_error("finite_difference_gradient: non-finite objective evaluation");
            }
            g[static_cast<std::size_t>(i)] = (hi - lo) / (2.0 * epsilon);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace dstlab

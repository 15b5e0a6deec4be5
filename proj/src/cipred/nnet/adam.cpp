#include "cipred/nnet/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cipred/kernels/kernels.hpp"

namespace cipred::nnet {

void adam_step(ParamSet& params, const Grads& grads, AdamState& state,
               const TrainConfig& cfg) {
    state.t += 1;
    const float c1 = static_cast<float>(1.0 - std::pow(cfg.beta1, state.t));
    const float c2 = static_cast<float>(1.0 - std::pow(cfg.beta2, state.t));
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        auto& tensor = params.tensors[i];
        if (tensor.frozen) continue;
        const auto& g = grads.g[i];
        for (float gv : g)
            if (!std::isfinite(gv))
                throw std::runtime_error("non-finite gradient in tensor " + tensor.name +
                                         " at step " + std::to_string(state.t));
        kernels::ops().adam_update(
            tensor.numel(), tensor.data.data(), g.data(), state.m[i].data(),
            state.v[i].data(), static_cast<float>(cfg.beta1),
            static_cast<float>(cfg.beta2), c1, c2,
            static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.eps),
            static_cast<float>(cfg.weight_decay));
    }
}

}  // namespace cipred::nnet

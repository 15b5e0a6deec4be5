#pragma once

#include <cstdint>
#include <vector>

#include "cipred/nnet/tensor.hpp"

namespace cipred::nnet {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 64;
    int max_epochs = 100;
    int early_stop_patience = 10;
    double weight_decay = 1e-5;
    double dropout_rate = 0.5;
    std::uint64_t seed = 1;

    void validate() const {
        if (learning_rate <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 ||
            eps <= 0 || batch_size <= 0 || max_epochs <= 0 ||
            early_stop_patience <= 0 || weight_decay < 0 || dropout_rate < 0 ||
            dropout_rate >= 1)
            throw ValidationError("invalid training configuration");
        if (early_stop_patience >= max_epochs)
            throw ValidationError("early stop patience must be below max_epochs");
    }
};

struct AdamState {
    std::vector<std::vector<float>> m, v;
    long t = 0;

    explicit AdamState(const ParamSet& p) {
        m.reserve(p.tensors.size());
        v.reserve(p.tensors.size());
        for (const auto& tns : p.tensors) {
            m.emplace_back(tns.numel(), 0.0f);
            v.emplace_back(tns.numel(), 0.0f);
        }
    }
};

// One Adam step with decoupled weight decay. Frozen tensors are untouched
// (no update, no decay, no moment advance). A non-finite gradient aborts the
// step with a diagnostic.
void adam_step(ParamSet& params, const Grads& grads, AdamState& state,
               const TrainConfig& cfg);

}  // namespace cipred::nnet

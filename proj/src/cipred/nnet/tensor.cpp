#include "cipred/nnet/tensor.hpp"

#include <cmath>

#include "cipred/kernels/kernels.hpp"

namespace cipred::nnet {

void Grads::add_scaled(const Grads& other, float scale) {
    for (std::size_t i = 0; i < g.size(); ++i)
        kernels::ops().saxpy(g[i].size(), scale, other.g[i].data(), g[i].data());
}

void he_init(NamedTensor& t, std::size_t fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& x : t.data) x = static_cast<float>(sd * rng.normal());
}

void xavier_init(NamedTensor& t, std::size_t fan_in, Rng& rng) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : t.data) x = static_cast<float>(sd * rng.normal());
}

}  // namespace cipred::nnet

#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cipred/core/errors.hpp"
#include "cipred/core/rng.hpp"

namespace cipred::nnet {

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
    bool frozen = false;

    std::size_t numel() const { return data.size(); }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ValidationError("tensor dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// Ordered, name-addressed parameter collection. Order is part of the
// serialization contract.
struct ParamSet {
    std::vector<NamedTensor> tensors;

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].name == name) return static_cast<int>(i);
        return -1;
    }
    NamedTensor& at(const std::string& name) {
        const int i = find(name);
        if (i < 0) throw ValidationError("no parameter tensor named " + name);
        return tensors[i];
    }
    const NamedTensor& at(const std::string& name) const {
        const int i = find(name);
        if (i < 0) throw ValidationError("no parameter tensor named " + name);
        return tensors[i];
    }
    NamedTensor& add(const std::string& name, std::vector<int> shape, bool frozen = false) {
        if (find(name) >= 0) throw ValidationError("duplicate tensor name " + name);
        NamedTensor t;
        t.name = name;
        t.shape = std::move(shape);
        t.data.assign(shape_numel(t.shape), 0.0f);
        t.frozen = frozen;
        tensors.push_back(std::move(t));
        return tensors.back();
    }
    void set_frozen(const std::string& prefix, bool frozen) {
        for (auto& t : tensors)
            if (t.name.rfind(prefix, 0) == 0) t.frozen = frozen;
    }
};

// Gradient buffers mirroring a ParamSet.
struct Grads {
    std::vector<std::vector<float>> g;

    explicit Grads(const ParamSet& p) {
        g.reserve(p.tensors.size());
        for (const auto& t : p.tensors) g.emplace_back(t.numel(), 0.0f);
    }
    void zero() {
        for (auto& v : g) std::fill(v.begin(), v.end(), 0.0f);
    }
    void add_scaled(const Grads& other, float scale);
};

void he_init(NamedTensor& t, std::size_t fan_in, Rng& rng);
void xavier_init(NamedTensor& t, std::size_t fan_in, Rng& rng);

}  // namespace cipred::nnet

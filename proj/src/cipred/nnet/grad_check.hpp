#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cipred/core/rng.hpp"
#include "cipred/nnet/attention.hpp"
#include "cipred/nnet/layers.hpp"

namespace cipred::nnet {

// Central-difference verification of analytic gradients over every parameter
// and input of a small fragment. The loss is a fixed random linear
// functional of the fragment output, which keeps third derivatives small and
// the checks sharp. Relative error uses an absolute floor of 1 so near-zero
// gradient entries are compared absolutely.

template <typename T>
struct GradCheckProblem {
    // Buffers the checker perturbs; grad buffers must align one-to-one.
    std::vector<std::vector<T>*> values;
    std::vector<std::vector<T>*> grads;
    std::function<double()> loss;          // forward pass, returns loss
    std::function<void()> compute_grads;   // fills all grad buffers
};

template <typename T>
double grad_check_max_rel_err(GradCheckProblem<T>& p, double eps) {
    p.compute_grads();
    std::vector<std::vector<T>> analytic;
    for (auto* g : p.grads) analytic.push_back(*g);

    double worst = 0.0;
    for (std::size_t b = 0; b < p.values.size(); ++b) {
        auto& buf = *p.values[b];
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const T orig = buf[i];
            buf[i] = orig + static_cast<T>(eps);
            const double up = p.loss();
            buf[i] = orig - static_cast<T>(eps);
            const double dn = p.loss();
            buf[i] = orig;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = static_cast<double>(analytic[b][i]);
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1.0});
            worst = std::max(worst, std::fabs(an - fd) / denom);
        }
    }
    return worst;
}

// Prebuilt fragments; each returns the max relative error at the given eps.
template <typename T>
double grad_check_affine_bce(std::uint64_t seed, double eps);
template <typename T>
double grad_check_conv3x3(std::uint64_t seed, double eps);
template <typename T>
double grad_check_dwconv(std::uint64_t seed, double eps);
template <typename T>
double grad_check_attention(std::uint64_t seed, double eps, int k_regions = 3,
                            int d_v = 4, int d_q = 3, int rank = 2, int d_out = 3);
template <typename T>
double grad_check_maxpool(std::uint64_t seed, double eps);

// ---------------------------------------------------------------- bodies

template <typename T>
double grad_check_affine_bce(std::uint64_t seed, double eps) {
    Rng rng(seed);
    const int n_in = 5, n_out = 3;
    std::vector<T> x(n_in), w(static_cast<std::size_t>(n_out) * n_in), b(n_out);
    for (auto& v : x) v = static_cast<T>(rng.normal());
    for (auto& v : w) v = static_cast<T>(0.5 * rng.normal());
    for (auto& v : b) v = static_cast<T>(0.3 * rng.normal());
    std::vector<T> y_target = {1, 0, 1};

    std::vector<T> dx(n_in), dw(w.size()), db(n_out);
    GradCheckProblem<T> p;
    p.values = {&x, &w, &b};
    p.grads = {&dx, &dw, &db};
    p.loss = [&]() {
        std::vector<T> z(n_out);
        affine_forward(x.data(), n_in, w.data(), b.data(), n_out, z.data());
        double loss = 0.0;
        for (int o = 0; o < n_out; ++o)
            loss += static_cast<double>(bce_with_logits(z[o], y_target[o]));
        return loss;
    };
    p.compute_grads = [&]() {
        std::fill(dx.begin(), dx.end(), T(0));
        std::fill(dw.begin(), dw.end(), T(0));
        std::fill(db.begin(), db.end(), T(0));
        std::vector<T> z(n_out), dz(n_out);
        affine_forward(x.data(), n_in, w.data(), b.data(), n_out, z.data());
        for (int o = 0; o < n_out; ++o) dz[o] = bce_with_logits_grad(z[o], y_target[o]);
        affine_backward(x.data(), n_in, w.data(), n_out, dz.data(), dx.data(), dw.data(),
                        db.data());
    };
    return grad_check_max_rel_err(p, eps);
}

template <typename T>
double grad_check_conv3x3(std::uint64_t seed, double eps) {
    Rng rng(seed);
    const int c_in = 2, c_out = 3, h = 8, w = 8;
    const std::size_t xn = static_cast<std::size_t>(c_in) * h * w;
    const std::size_t yn = static_cast<std::size_t>(c_out) * h * w;
    std::vector<T> x(xn), wgt(static_cast<std::size_t>(c_out) * c_in * 9), bias(c_out);
    std::vector<T> coeff(yn);
    for (auto& v : x) v = static_cast<T>(rng.normal());
    for (auto& v : wgt) v = static_cast<T>(0.4 * rng.normal());
    for (auto& v : bias) v = static_cast<T>(0.2 * rng.normal());
    for (auto& v : coeff) v = static_cast<T>(rng.normal());

    std::vector<T> dx(xn), dwgt(wgt.size()), dbias(c_out);
    GradCheckProblem<T> p;
    p.values = {&x, &wgt, &bias};
    p.grads = {&dx, &dwgt, &dbias};
    p.loss = [&]() {
        std::vector<T> y(yn);
        conv3x3_forward(x.data(), c_in, h, w, wgt.data(), bias.data(), c_out, y.data());
        double s = 0.0;
        for (std::size_t i = 0; i < yn; ++i)
            s += static_cast<double>(coeff[i]) * static_cast<double>(y[i]);
        return s;
    };
    p.compute_grads = [&]() {
        std::fill(dx.begin(), dx.end(), T(0));
        std::fill(dwgt.begin(), dwgt.end(), T(0));
        std::fill(dbias.begin(), dbias.end(), T(0));
        conv3x3_backward(x.data(), c_in, h, w, wgt.data(), c_out, coeff.data(), dx.data(),
                         dwgt.data(), dbias.data());
    };
    return grad_check_max_rel_err(p, eps);
}

template <typename T>
double grad_check_dwconv(std::uint64_t seed, double eps) {
    Rng rng(seed);
    const int c = 3, h = 6, w = 6;
    const std::size_t xn = static_cast<std::size_t>(c) * h * w;
    std::vector<T> x(xn), wgt(static_cast<std::size_t>(c) * 9), bias(c), coeff(xn);
    for (auto& v : x) v = static_cast<T>(rng.normal());
    for (auto& v : wgt) v = static_cast<T>(0.4 * rng.normal());
    for (auto& v : bias) v = static_cast<T>(0.2 * rng.normal());
    for (auto& v : coeff) v = static_cast<T>(rng.normal());

    std::vector<T> dx(xn), dwgt(wgt.size()), dbias(c);
    GradCheckProblem<T> p;
    p.values = {&x, &wgt, &bias};
    p.grads = {&dx, &dwgt, &dbias};
    p.loss = [&]() {
        std::vector<T> y(xn);
        dwconv3x3_forward(x.data(), c, h, w, wgt.data(), bias.data(), y.data());
        double s = 0.0;
        for (std::size_t i = 0; i < xn; ++i)
            s += static_cast<double>(coeff[i]) * static_cast<double>(y[i]);
        return s;
    };
    p.compute_grads = [&]() {
        std::fill(dx.begin(), dx.end(), T(0));
        std::fill(dwgt.begin(), dwgt.end(), T(0));
        std::fill(dbias.begin(), dbias.end(), T(0));
        dwconv3x3_backward(x.data(), c, h, w, wgt.data(), coeff.data(), dx.data(),
                           dwgt.data(), dbias.data());
    };
    return grad_check_max_rel_err(p, eps);
}

template <typename T>
double grad_check_attention(std::uint64_t seed, double eps, int k_regions, int d_v,
                            int d_q, int rank, int d_out) {
    Rng rng(seed);
    AttentionDims<T> dm;
    dm.k_regions = k_regions;
    dm.d_v = d_v;
    dm.d_q = d_q;
    dm.rank = rank;
    dm.d_out = d_out;
    std::vector<T> V(static_cast<std::size_t>(k_regions) * d_v), q(d_q);
    std::vector<T> U(static_cast<std::size_t>(d_v) * rank),
        W(static_cast<std::size_t>(d_q) * rank), pvec(rank),
        P(static_cast<std::size_t>(rank) * d_out), coeff(d_out);
    // Redraw until both relu branches are active somewhere; a dead gate or
    // dead region branch would zero all gradients and make the check vacuous.
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (auto* buf : {&V, &q, &U, &pvec, &P, &coeff})
            for (auto& v : *buf) v = static_cast<T>(rng.normal());
        for (auto& v : q) v = static_cast<T>(0.8 + 0.3 * rng.normal());
        for (auto& v : W) v = static_cast<T>(0.6 + 0.4 * rng.normal());
        AttentionCache<T> probe;
        std::vector<T> fused(d_out);
        attention_forward(dm, V.data(), q.data(), U.data(), W.data(), pvec.data(),
                          P.data(), probe, static_cast<T*>(nullptr), fused.data());
        double norm = 0.0;
        for (T f : fused) norm += static_cast<double>(f) * f;
        bool region_active = false;
        for (T a : probe.abar) region_active = region_active || a > T(0);
        if (norm > 1e-6 && region_active) break;
    }

    std::vector<T> dV(V.size()), dq(q.size()), dU(U.size()), dW(W.size()),
        dp(pvec.size()), dP(P.size());
    AttentionCache<T> cache;
    GradCheckProblem<T> p;
    p.values = {&V, &q, &U, &W, &pvec, &P};
    p.grads = {&dV, &dq, &dU, &dW, &dp, &dP};
    p.loss = [&]() {
        std::vector<T> fused(d_out);
        AttentionCache<T> c;
        attention_forward(dm, V.data(), q.data(), U.data(), W.data(), pvec.data(),
                          P.data(), c, static_cast<T*>(nullptr), fused.data());
        double s = 0.0;
        for (int o = 0; o < d_out; ++o)
            s += static_cast<double>(coeff[o]) * static_cast<double>(fused[o]);
        return s;
    };
    p.compute_grads = [&]() {
        for (auto* g : p.grads) std::fill(g->begin(), g->end(), T(0));
        std::vector<T> fused(d_out);
        attention_forward(dm, V.data(), q.data(), U.data(), W.data(), pvec.data(),
                          P.data(), cache, static_cast<T*>(nullptr), fused.data());
        attention_backward(dm, U.data(), W.data(), pvec.data(), P.data(), cache,
                           coeff.data(), dV.data(), dq.data(), dU.data(), dW.data(),
                           dp.data(), dP.data());
    };
    return grad_check_max_rel_err(p, eps);
}

template <typename T>
double grad_check_maxpool(std::uint64_t seed, double eps) {
    Rng rng(seed);
    const int c = 2, h = 6, w = 6;
    const std::size_t xn = static_cast<std::size_t>(c) * h * w;
    const std::size_t yn = xn / 4;
    std::vector<T> x(xn), coeff(yn);
    for (auto& v : x) v = static_cast<T>(rng.normal());
    for (auto& v : coeff) v = static_cast<T>(rng.normal());

    std::vector<T> dx(xn);
    GradCheckProblem<T> p;
    p.values = {&x};
    p.grads = {&dx};
    p.loss = [&]() {
        std::vector<T> y(yn);
        std::vector<unsigned char> am(yn);
        maxpool2x2_forward(x.data(), c, h, w, y.data(), am.data());
        double s = 0.0;
        for (std::size_t i = 0; i < yn; ++i)
            s += static_cast<double>(coeff[i]) * static_cast<double>(y[i]);
        return s;
    };
    p.compute_grads = [&]() {
        std::vector<T> y(yn);
        std::vector<unsigned char> am(yn);
        maxpool2x2_forward(x.data(), c, h, w, y.data(), am.data());
        std::vector<T> dy(coeff);
        maxpool2x2_backward(dy.data(), c, h, w, am.data(), dx.data());
    };
    return grad_check_max_rel_err(p, eps);
}

}  // namespace cipred::nnet

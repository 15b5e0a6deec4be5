#pragma once

#include <cmath>
#include <cstring>
#include <vector>

namespace cipred::nnet {

// Low-rank bilinear attention over image regions gated by the clinical
// vector, followed by bilinear pooling of the attended region feature:
//
//   a_k  = U' v_k,  abar_k = relu(a_k)          (per region, rank r)
//   g    = W' q,    gbar   = relu(g)
//   l_k  = p . (abar_k * gbar)                  (region logits)
//   alpha = softmax(l)
//   vbar = sum_k alpha_k v_k
//   fused = P' (relu(U' vbar) * gbar)
//
// Shapes: V [K][d_v], q [d_q], U [d_v][r], W [d_q][r], p [r], P [r][d_out].

template <typename T>
struct AttentionDims {
    int k_regions = 64;
    int d_v = 128;
    int d_q = 32;
    int rank = 32;
    int d_out = 64;
};

template <typename T>
struct AttentionCache {
    std::vector<T> a;      // K x r, pre-relu
    std::vector<T> abar;   // K x r
    std::vector<T> g;      // r, pre-relu
    std::vector<T> gbar;   // r
    std::vector<T> logits; // K
    std::vector<T> alpha;  // K
    std::vector<T> vbar;   // d_v
    std::vector<T> astar;  // r, pre-relu
    std::vector<T> hstar;  // r
    std::vector<T> v;      // copy of V (K x d_v), for the backward pass
    std::vector<T> q;      // copy of q
};

template <typename T>
void attention_forward(const AttentionDims<T>& dm, const T* V, const T* q, const T* U,
                       const T* W, const T* p, const T* P, AttentionCache<T>& c,
                       T* alpha_out, T* fused_out) {
    const int K = dm.k_regions, dv = dm.d_v, dq = dm.d_q, r = dm.rank, dout = dm.d_out;
    c.a.assign(static_cast<std::size_t>(K) * r, T(0));
    c.abar.resize(static_cast<std::size_t>(K) * r);
    c.g.assign(r, T(0));
    c.gbar.resize(r);
    c.logits.resize(K);
    c.alpha.resize(K);
    c.vbar.assign(dv, T(0));
    c.astar.assign(r, T(0));
    c.hstar.resize(r);
    c.v.assign(V, V + static_cast<std::size_t>(K) * dv);
    c.q.assign(q, q + dq);

    // g = W' q, gated through relu.
    for (int i = 0; i < dq; ++i) {
        const T qi = q[i];
        const T* wrow = W + static_cast<std::size_t>(i) * r;
        for (int t = 0; t < r; ++t) c.g[t] += wrow[t] * qi;
    }
    for (int t = 0; t < r; ++t) c.gbar[t] = c.g[t] > T(0) ? c.g[t] : T(0);

    // Region projections and logits.
    for (int k = 0; k < K; ++k) {
        const T* vk = V + static_cast<std::size_t>(k) * dv;
        T* ak = c.a.data() + static_cast<std::size_t>(k) * r;
        for (int d = 0; d < dv; ++d) {
            const T vd = vk[d];
            if (vd == T(0)) continue;
            const T* urow = U + static_cast<std::size_t>(d) * r;
            for (int t = 0; t < r; ++t) ak[t] += urow[t] * vd;
        }
        T* abk = c.abar.data() + static_cast<std::size_t>(k) * r;
        T logit = T(0);
        for (int t = 0; t < r; ++t) {
            abk[t] = ak[t] > T(0) ? ak[t] : T(0);
            logit += p[t] * abk[t] * c.gbar[t];
        }
        c.logits[k] = logit;
    }

    // Softmax over regions.
    T lmax = c.logits[0];
    for (int k = 1; k < K; ++k) lmax = std::max(lmax, c.logits[k]);
    double denom = 0.0;
    for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(c.logits[k] - lmax));
    for (int k = 0; k < K; ++k)
        c.alpha[k] = static_cast<T>(std::exp(static_cast<double>(c.logits[k] - lmax)) / denom);

    // Attention-pooled region vector.
    for (int k = 0; k < K; ++k) {
        const T ak = c.alpha[k];
        const T* vk = V + static_cast<std::size_t>(k) * dv;
        for (int d = 0; d < dv; ++d) c.vbar[d] += ak * vk[d];
    }

    // Bilinear pooling of the fused pair.
    for (int d = 0; d < dv; ++d) {
        const T vd = c.vbar[d];
        if (vd == T(0)) continue;
        const T* urow = U + static_cast<std::size_t>(d) * r;
        for (int t = 0; t < r; ++t) c.astar[t] += urow[t] * vd;
    }
    for (int t = 0; t < r; ++t) {
        const T rel = c.astar[t] > T(0) ? c.astar[t] : T(0);
        c.hstar[t] = rel * c.gbar[t];
    }
    for (int o = 0; o < dout; ++o) fused_out[o] = T(0);
    for (int t = 0; t < r; ++t) {
        const T ht = c.hstar[t];
        if (ht == T(0)) continue;
        const T* prow = P + static_cast<std::size_t>(t) * dout;
        for (int o = 0; o < dout; ++o) fused_out[o] += prow[o] * ht;
    }
    if (alpha_out) std::memcpy(alpha_out, c.alpha.data(), sizeof(T) * K);
}

// Gradients are accumulated into the d* buffers; dV/dq may be null.
template <typename T>
void attention_backward(const AttentionDims<T>& dm, const T* U, const T* W, const T* p,
                        const T* P, const AttentionCache<T>& c, const T* dfused, T* dV,
                        T* dq, T* dU, T* dW, T* dp, T* dP) {
    const int K = dm.k_regions, dv = dm.d_v, dq_n = dm.d_q, r = dm.rank, dout = dm.d_out;

    std::vector<T> dhstar(r, T(0)), dgbar(r, T(0)), dastar(r, T(0));
    // dP and dh* from fused = P' h*.
    for (int t = 0; t < r; ++t) {
        const T* prow = P + static_cast<std::size_t>(t) * dout;
        T s = T(0);
        for (int o = 0; o < dout; ++o) {
            s += prow[o] * dfused[o];
            if (dP) dP[static_cast<std::size_t>(t) * dout + o] += c.hstar[t] * dfused[o];
        }
        dhstar[t] = s;
    }
    for (int t = 0; t < r; ++t) {
        const T rel = c.astar[t] > T(0) ? c.astar[t] : T(0);
        dgbar[t] += dhstar[t] * rel;
        dastar[t] = (c.astar[t] > T(0)) ? dhstar[t] * c.gbar[t] : T(0);
    }

    // Through astar = U' vbar.
    std::vector<T> dvbar(dv, T(0));
    for (int d = 0; d < dv; ++d) {
        const T* urow = U + static_cast<std::size_t>(d) * r;
        T s = T(0);
        for (int t = 0; t < r; ++t) {
            s += urow[t] * dastar[t];
            if (dU) dU[static_cast<std::size_t>(d) * r + t] += c.vbar[d] * dastar[t];
        }
        dvbar[d] = s;
    }

    // Through vbar = sum alpha_k v_k.
    std::vector<T> dalpha(K, T(0));
    for (int k = 0; k < K; ++k) {
        const T* vk = c.v.data() + static_cast<std::size_t>(k) * dv;
        T s = T(0);
        for (int d = 0; d < dv; ++d) {
            s += vk[d] * dvbar[d];
            if (dV) dV[static_cast<std::size_t>(k) * dv + d] += c.alpha[k] * dvbar[d];
        }
        dalpha[k] = s;
    }

    // Softmax backward.
    T dot = T(0);
    for (int k = 0; k < K; ++k) dot += c.alpha[k] * dalpha[k];
    std::vector<T> dlogit(K);
    for (int k = 0; k < K; ++k) dlogit[k] = c.alpha[k] * (dalpha[k] - dot);

    // Through the region logits l_k = p . (abar_k * gbar).
    std::vector<T> da(r);
    for (int k = 0; k < K; ++k) {
        const T dl = dlogit[k];
        const T* abk = c.abar.data() + static_cast<std::size_t>(k) * r;
        const T* ak = c.a.data() + static_cast<std::size_t>(k) * r;
        for (int t = 0; t < r; ++t) {
            const T h_kt = abk[t] * c.gbar[t];
            if (dp) dp[t] += dl * h_kt;
            const T dh = dl * p[t];
            dgbar[t] += dh * abk[t];
            da[t] = (ak[t] > T(0)) ? dh * c.gbar[t] : T(0);
        }
        const T* vk = c.v.data() + static_cast<std::size_t>(k) * dv;
        for (int d = 0; d < dv; ++d) {
            const T vd = vk[d];
            const T* urow = U + static_cast<std::size_t>(d) * r;
            T s = T(0);
            for (int t = 0; t < r; ++t) {
                s += urow[t] * da[t];
                if (dU) dU[static_cast<std::size_t>(d) * r + t] += vd * da[t];
            }
            if (dV) dV[static_cast<std::size_t>(k) * dv + d] += s;
        }
    }

    // Through the clinical gate g = W' q.
    for (int t = 0; t < r; ++t)
        if (!(c.g[t] > T(0))) dgbar[t] = T(0);
    for (int i = 0; i < dq_n; ++i) {
        const T* wrow = W + static_cast<std::size_t>(i) * r;
        T s = T(0);
        for (int t = 0; t < r; ++t) {
            s += wrow[t] * dgbar[t];
            if (dW) dW[static_cast<std::size_t>(i) * r + t] += c.q[i] * dgbar[t];
        }
        if (dq) dq[i] += s;
    }
}

}  // namespace cipred::nnet

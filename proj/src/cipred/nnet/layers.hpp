#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "cipred/core/rng.hpp"
#include "cipred/kernels/kernels.hpp"

namespace cipred::nnet {

// Layer primitives templated on the scalar type. The generic bodies are
// straightforward reference loops (used by the double-precision gradient
// harness); float overloads route the heavy lifting through kernels/.

// ---------------------------------------------------------------- conv 3x3
// Stride 1, zero padding 1, NCHW single image. wgt layout:
// [c_out][c_in][3][3]; y layout [c_out][h][w].

template <typename T>
void conv3x3_forward(const T* x, int c_in, int h, int w, const T* wgt, const T* bias,
                     int c_out, T* y) {
    for (int o = 0; o < c_out; ++o) {
        T* yo = y + static_cast<std::size_t>(o) * h * w;
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) yo[yy * w + xx] = bias ? bias[o] : T(0);
        for (int c = 0; c < c_in; ++c) {
            const T* xc = x + static_cast<std::size_t>(c) * h * w;
            const T* k = wgt + (static_cast<std::size_t>(o) * c_in + c) * 9;
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) {
                    T acc = 0;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = yy + ky - 1;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= w) continue;
                            acc += k[ky * 3 + kx] * xc[sy * w + sx];
                        }
                    }
                    yo[yy * w + xx] += acc;
                }
            }
        }
    }
}

// dx/dwgt/dbias are accumulated into; dx may be null when the input gradient
// is not needed (frozen stages).
template <typename T>
void conv3x3_backward(const T* x, int c_in, int h, int w, const T* wgt, int c_out,
                      const T* dy, T* dx, T* dwgt, T* dbias) {
    for (int o = 0; o < c_out; ++o) {
        const T* dyo = dy + static_cast<std::size_t>(o) * h * w;
        if (dbias) {
            T s = 0;
            for (int i = 0; i < h * w; ++i) s += dyo[i];
            dbias[o] += s;
        }
        for (int c = 0; c < c_in; ++c) {
            const T* xc = x + static_cast<std::size_t>(c) * h * w;
            T* dxc = dx ? dx + static_cast<std::size_t>(c) * h * w : nullptr;
            const T* k = wgt + (static_cast<std::size_t>(o) * c_in + c) * 9;
            T* dk = dwgt ? dwgt + (static_cast<std::size_t>(o) * c_in + c) * 9 : nullptr;
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) {
                    const T g = dyo[yy * w + xx];
                    if (g == T(0)) continue;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = yy + ky - 1;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= w) continue;
                            if (dk) dk[ky * 3 + kx] += g * xc[sy * w + sx];
                            if (dxc) dxc[sy * w + sx] += g * k[ky * 3 + kx];
                        }
                    }
                }
            }
        }
    }
}

// Fast float path: im2col + GEMM.
void im2col3x3(const float* x, int c_in, int h, int w, float* col);
void col2im3x3_add(const float* col, int c_in, int h, int w, float* dx);
void conv3x3_forward(const float* x, int c_in, int h, int w, const float* wgt,
                     const float* bias, int c_out, float* y);
void conv3x3_backward(const float* x, int c_in, int h, int w, const float* wgt,
                      int c_out, const float* dy, float* dx, float* dwgt, float* dbias);

// ------------------------------------------------- depthwise separable 3x3
// Depthwise kernel layout [c][3][3], then pointwise [c_out][c_in] + bias.

template <typename T>
void dwconv3x3_forward(const T* x, int c, int h, int w, const T* wgt, const T* bias,
                       T* y) {
    for (int ch = 0; ch < c; ++ch) {
        const T* xc = x + static_cast<std::size_t>(ch) * h * w;
        const T* k = wgt + static_cast<std::size_t>(ch) * 9;
        T* yc = y + static_cast<std::size_t>(ch) * h * w;
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) {
                T acc = bias ? bias[ch] : T(0);
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = yy + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = xx + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        acc += k[ky * 3 + kx] * xc[sy * w + sx];
                    }
                }
                yc[yy * w + xx] = acc;
            }
        }
    }
}

template <typename T>
void dwconv3x3_backward(const T* x, int c, int h, int w, const T* wgt, const T* dy,
                        T* dx, T* dwgt, T* dbias) {
    for (int ch = 0; ch < c; ++ch) {
        const T* xc = x + static_cast<std::size_t>(ch) * h * w;
        const T* dyc = dy + static_cast<std::size_t>(ch) * h * w;
        const T* k = wgt + static_cast<std::size_t>(ch) * 9;
        T* dk = dwgt ? dwgt + static_cast<std::size_t>(ch) * 9 : nullptr;
        T* dxc = dx ? dx + static_cast<std::size_t>(ch) * h * w : nullptr;
        if (dbias) {
            T s = 0;
            for (int i = 0; i < h * w; ++i) s += dyc[i];
            dbias[ch] += s;
        }
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) {
                const T g = dyc[yy * w + xx];
                if (g == T(0)) continue;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = yy + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = xx + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        if (dk) dk[ky * 3 + kx] += g * xc[sy * w + sx];
                        if (dxc) dxc[sy * w + sx] += g * k[ky * 3 + kx];
                    }
                }
            }
        }
    }
}

template <typename T>
void conv1x1_forward(const T* x, int c_in, int h, int w, const T* wgt, const T* bias,
                     int c_out, T* y) {
    const int hw = h * w;
    for (int o = 0; o < c_out; ++o) {
        T* yo = y + static_cast<std::size_t>(o) * hw;
        for (int i = 0; i < hw; ++i) yo[i] = bias ? bias[o] : T(0);
        for (int c = 0; c < c_in; ++c) {
            const T wv = wgt[static_cast<std::size_t>(o) * c_in + c];
            const T* xc = x + static_cast<std::size_t>(c) * hw;
            for (int i = 0; i < hw; ++i) yo[i] += wv * xc[i];
        }
    }
}

void conv1x1_forward(const float* x, int c_in, int h, int w, const float* wgt,
                     const float* bias, int c_out, float* y);

template <typename T>
void conv1x1_backward(const T* x, int c_in, int h, int w, const T* wgt, int c_out,
                      const T* dy, T* dx, T* dwgt, T* dbias) {
    const int hw = h * w;
    for (int o = 0; o < c_out; ++o) {
        const T* dyo = dy + static_cast<std::size_t>(o) * hw;
        if (dbias) {
            T s = 0;
            for (int i = 0; i < hw; ++i) s += dyo[i];
            dbias[o] += s;
        }
        for (int c = 0; c < c_in; ++c) {
            const T* xc = x + static_cast<std::size_t>(c) * hw;
            if (dwgt) {
                T s = 0;
                for (int i = 0; i < hw; ++i) s += dyo[i] * xc[i];
                dwgt[static_cast<std::size_t>(o) * c_in + c] += s;
            }
            if (dx) {
                const T wv = wgt[static_cast<std::size_t>(o) * c_in + c];
                T* dxc = dx + static_cast<std::size_t>(c) * hw;
                for (int i = 0; i < hw; ++i) dxc[i] += wv * dyo[i];
            }
        }
    }
}

void conv1x1_backward(const float* x, int c_in, int h, int w, const float* wgt,
                      int c_out, const float* dy, float* dx, float* dwgt, float* dbias);

// ---------------------------------------------------------------- pooling
// 2x2 max pool, stride 2; h and w must be even. argmax in {0,1,2,3} encodes
// (dy, dx) of the winner for the backward scatter.

template <typename T>
void maxpool2x2_forward(const T* x, int c, int h, int w, T* y, unsigned char* argmax) {
    const int ho = h / 2, wo = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const T* xc = x + static_cast<std::size_t>(ch) * h * w;
        T* yc = y + static_cast<std::size_t>(ch) * ho * wo;
        unsigned char* am = argmax + static_cast<std::size_t>(ch) * ho * wo;
        for (int yy = 0; yy < ho; ++yy) {
            for (int xx = 0; xx < wo; ++xx) {
                const int base = (2 * yy) * w + 2 * xx;
                T best = xc[base];
                unsigned char arg = 0;
                const T cand1 = xc[base + 1];
                if (cand1 > best) { best = cand1; arg = 1; }
                const T cand2 = xc[base + w];
                if (cand2 > best) { best = cand2; arg = 2; }
                const T cand3 = xc[base + w + 1];
                if (cand3 > best) { best = cand3; arg = 3; }
                yc[yy * wo + xx] = best;
                am[yy * wo + xx] = arg;
            }
        }
    }
}

template <typename T>
void maxpool2x2_backward(const T* dy, int c, int h, int w, const unsigned char* argmax,
                         T* dx) {
    const int ho = h / 2, wo = w / 2;
    std::memset(dx, 0, static_cast<std::size_t>(c) * h * w * sizeof(T));
    for (int ch = 0; ch < c; ++ch) {
        const T* dyc = dy + static_cast<std::size_t>(ch) * ho * wo;
        const unsigned char* am = argmax + static_cast<std::size_t>(ch) * ho * wo;
        T* dxc = dx + static_cast<std::size_t>(ch) * h * w;
        for (int yy = 0; yy < ho; ++yy) {
            for (int xx = 0; xx < wo; ++xx) {
                const unsigned char a = am[yy * wo + xx];
                const int base = (2 * yy + a / 2) * w + 2 * xx + a % 2;
                dxc[base] += dyc[yy * wo + xx];
            }
        }
    }
}

// ------------------------------------------------------------------- relu

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}
inline void relu_forward(const float* x, std::size_t n, float* y) {
    kernels::ops().relu_fwd(n, x, y);
}

template <typename T>
void relu_backward(const T* x, const T* dy, std::size_t n, T* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}
inline void relu_backward(const float* x, const float* dy, std::size_t n, float* dx) {
    kernels::ops().relu_bwd(n, x, dy, dx);
}

// ----------------------------------------------------------------- affine
// y = W x + b with W [n_out][n_in].

template <typename T>
void affine_forward(const T* x, int n_in, const T* wgt, const T* bias, int n_out, T* y) {
    for (int o = 0; o < n_out; ++o) {
        T s = bias ? bias[o] : T(0);
        const T* wr = wgt + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) s += wr[i] * x[i];
        y[o] = s;
    }
}
inline void affine_forward(const float* x, int n_in, const float* wgt, const float* bias,
                           int n_out, float* y) {
    for (int o = 0; o < n_out; ++o)
        y[o] = (bias ? bias[o] : 0.0f) +
               kernels::ops().sdot(static_cast<std::size_t>(n_in),
                                   wgt + static_cast<std::size_t>(o) * n_in, x);
}

template <typename T>
void affine_backward(const T* x, int n_in, const T* wgt, int n_out, const T* dy, T* dx,
                     T* dwgt, T* dbias) {
    if (dx)
        for (int i = 0; i < n_in; ++i) dx[i] = T(0);
    for (int o = 0; o < n_out; ++o) {
        const T g = dy[o];
        if (dbias) dbias[o] += g;
        const T* wr = wgt + static_cast<std::size_t>(o) * n_in;
        T* dwr = dwgt ? dwgt + static_cast<std::size_t>(o) * n_in : nullptr;
        for (int i = 0; i < n_in; ++i) {
            if (dwr) dwr[i] += g * x[i];
            if (dx) dx[i] += g * wr[i];
        }
    }
}

// ---------------------------------------------------------------- dropout
// Inverted dropout; mask entries are 0 or 1/(1-rate).

template <typename T>
void dropout_forward(const T* x, std::size_t n, double rate, Rng& rng, T* mask, T* y) {
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = (rate > 0.0 && rng.uniform() < rate) ? T(0) : scale;
        y[i] = x[i] * mask[i];
    }
}

template <typename T>
void dropout_backward(const T* mask, const T* dy, std::size_t n, T* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * mask[i];
}

// ----------------------------------------------------------------- losses
// Numerically stable binary cross-entropy on the logit:
//   loss = max(z,0) - z*y + log(1 + exp(-|z|)).

template <typename T>
T bce_with_logits(T z, T y) {
    const T zpos = z > T(0) ? z : T(0);
    return zpos - z * y + std::log1p(std::exp(-std::fabs(static_cast<double>(z))));
}

template <typename T>
T bce_with_logits_grad(T z, T y) {
    // sigmoid(z) - y, computed stably.
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(z)));
    return static_cast<T>(s - static_cast<double>(y));
}

// Multi-class softmax cross-entropy on logits (pretraining head).
template <typename T>
T softmax_ce(const T* z, int k, int label, T* dz) {
    T zmax = z[0];
    for (int i = 1; i < k; ++i) zmax = std::max(zmax, z[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::exp(static_cast<double>(z[i] - zmax));
    const double logsum = std::log(sum) + static_cast<double>(zmax);
    if (dz) {
        for (int i = 0; i < k; ++i) {
            const double p = std::exp(static_cast<double>(z[i]) - logsum);
            dz[i] = static_cast<T>(p - (i == label ? 1.0 : 0.0));
        }
    }
    return static_cast<T>(logsum - static_cast<double>(z[label]));
}

}  // namespace cipred::nnet

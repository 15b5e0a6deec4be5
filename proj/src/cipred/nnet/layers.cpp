#include "cipred/nnet/layers.hpp"

#include <algorithm>
#include <vector>

namespace cipred::nnet {

namespace {

thread_local std::vector<float> t_col;
thread_local std::vector<float> t_dcol;
thread_local std::vector<float> t_wt;

}  // namespace

void im2col3x3(const float* x, int c_in, int h, int w, float* col) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        const float* xc = x + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                float* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1, dx = kx - 1;
                for (int yy = 0; yy < h; ++yy) {
                    float* dst = row + static_cast<std::size_t>(yy) * w;
                    const int sy = yy + dy;
                    if (sy < 0 || sy >= h) {
                        std::memset(dst, 0, sizeof(float) * w);
                        continue;
                    }
                    const float* src = xc + static_cast<std::size_t>(sy) * w;
                    const int x_lo = std::max(0, -dx);        // first valid output x
                    const int x_hi = std::min(w, w - dx);     // one past last valid
                    if (x_lo > 0) std::memset(dst, 0, sizeof(float) * x_lo);
                    if (x_hi > x_lo)
                        std::memcpy(dst + x_lo, src + x_lo + dx,
                                    sizeof(float) * (x_hi - x_lo));
                    if (x_hi < w) std::memset(dst + x_hi, 0, sizeof(float) * (w - x_hi));
                }
            }
        }
    }
}

void col2im3x3_add(const float* col, int c_in, int h, int w, float* dx) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        float* dxc = dx + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const float* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1, dxo = kx - 1;
                for (int yy = 0; yy < h; ++yy) {
                    const int sy = yy + dy;
                    if (sy < 0 || sy >= h) continue;
                    const float* src = row + static_cast<std::size_t>(yy) * w;
                    float* dst = dxc + static_cast<std::size_t>(sy) * w;
                    const int x_lo = std::max(0, -dxo);
                    const int x_hi = std::min(w, w - dxo);
                    if (x_hi > x_lo)
                        kernels::ops().saxpy(static_cast<std::size_t>(x_hi - x_lo), 1.0f,
                                             src + x_lo, dst + x_lo + dxo);
                }
            }
        }
    }
}

void conv3x3_forward(const float* x, int c_in, int h, int w, const float* wgt,
                     const float* bias, int c_out, float* y) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t kdim = static_cast<std::size_t>(c_in) * 9;
    t_col.resize(kdim * hw);
    im2col3x3(x, c_in, h, w, t_col.data());
    kernels::ops().sgemm(static_cast<std::size_t>(c_out), hw, kdim, wgt, t_col.data(), y,
                         false);
    if (bias) {
        for (int o = 0; o < c_out; ++o) {
            float* yo = y + static_cast<std::size_t>(o) * hw;
            const float b = bias[o];
            for (std::size_t i = 0; i < hw; ++i) yo[i] += b;
        }
    }
}

void conv3x3_backward(const float* x, int c_in, int h, int w, const float* wgt,
                      int c_out, const float* dy, float* dx, float* dwgt, float* dbias) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t kdim = static_cast<std::size_t>(c_in) * 9;
    if (dbias) {
        for (int o = 0; o < c_out; ++o)
            dbias[o] += static_cast<float>(
                kernels::ops().ssum(hw, dy + static_cast<std::size_t>(o) * hw));
    }
    if (dwgt) {
        t_col.resize(kdim * hw);
        im2col3x3(x, c_in, h, w, t_col.data());
        for (int o = 0; o < c_out; ++o) {
            const float* dyo = dy + static_cast<std::size_t>(o) * hw;
            float* dwo = dwgt + static_cast<std::size_t>(o) * kdim;
            for (std::size_t k = 0; k < kdim; ++k)
                dwo[k] += kernels::ops().sdot(hw, dyo, t_col.data() + k * hw);
        }
    }
    if (dx) {
        t_wt.resize(kdim * static_cast<std::size_t>(c_out));
        for (int o = 0; o < c_out; ++o)
            for (std::size_t k = 0; k < kdim; ++k)
                t_wt[k * c_out + o] = wgt[static_cast<std::size_t>(o) * kdim + k];
        t_dcol.resize(kdim * hw);
        kernels::ops().sgemm(kdim, hw, static_cast<std::size_t>(c_out), t_wt.data(), dy,
                             t_dcol.data(), false);
        col2im3x3_add(t_dcol.data(), c_in, h, w, dx);
    }
}

void conv1x1_forward(const float* x, int c_in, int h, int w, const float* wgt,
                     const float* bias, int c_out, float* y) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    kernels::ops().sgemm(static_cast<std::size_t>(c_out), hw,
                         static_cast<std::size_t>(c_in), wgt, x, y, false);
    if (bias) {
        for (int o = 0; o < c_out; ++o) {
            float* yo = y + static_cast<std::size_t>(o) * hw;
            const float b = bias[o];
            for (std::size_t i = 0; i < hw; ++i) yo[i] += b;
        }
    }
}

void conv1x1_backward(const float* x, int c_in, int h, int w, const float* wgt,
                      int c_out, const float* dy, float* dx, float* dwgt, float* dbias) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    if (dbias) {
        for (int o = 0; o < c_out; ++o)
            dbias[o] += static_cast<float>(
                kernels::ops().ssum(hw, dy + static_cast<std::size_t>(o) * hw));
    }
    if (dwgt) {
        for (int o = 0; o < c_out; ++o) {
            const float* dyo = dy + static_cast<std::size_t>(o) * hw;
            float* dwo = dwgt + static_cast<std::size_t>(o) * c_in;
            for (int c = 0; c < c_in; ++c)
                dwo[c] += kernels::ops().sdot(hw, dyo, x + static_cast<std::size_t>(c) * hw);
        }
    }
    if (dx) {
        t_wt.resize(static_cast<std::size_t>(c_in) * c_out);
        for (int o = 0; o < c_out; ++o)
            for (int c = 0; c < c_in; ++c)
                t_wt[static_cast<std::size_t>(c) * c_out + o] =
                    wgt[static_cast<std::size_t>(o) * c_in + c];
        t_dcol.resize(static_cast<std::size_t>(c_in) * hw);
        kernels::ops().sgemm(static_cast<std::size_t>(c_in), hw,
                             static_cast<std::size_t>(c_out), t_wt.data(), dy,
                             t_dcol.data(), false);
        kernels::ops().saxpy(static_cast<std::size_t>(c_in) * hw, 1.0f, t_dcol.data(), dx);
    }
}

}  // namespace cipred::nnet

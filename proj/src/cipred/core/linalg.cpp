#include "cipred/core/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cipred/core/errors.hpp"

namespace cipred::linalg {

Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw ValidationError("matmul: inner dimension mismatch");
    Mat out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xv = x(i, k);
            if (xv == 0.0) continue;
            const double* yr = &y.a[k * y.cols];
            double* outr = &out.a[i * out.cols];
            for (std::size_t j = 0; j < y.cols; ++j) outr[j] += xv * yr[j];
        }
    }
    return out;
}

Mat transpose(const Mat& x) {
    Mat out(x.cols, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
    return out;
}

Mat identity(std::size_t n) {
    Mat out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

Mat cholesky(const Mat& spd) {
    if (spd.rows != spd.cols) throw ValidationError("cholesky: matrix not square");
    const std::size_t n = spd.rows;
    Mat l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = spd(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw ValidationError("cholesky: matrix not positive definite");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = spd(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Mat cholesky_solve(const Mat& spd, const Mat& b) {
    const Mat l = cholesky(spd);
    const std::size_t n = spd.rows;
    if (b.rows != n) throw ValidationError("cholesky_solve: rhs dimension mismatch");
    Mat x = b;
    // Forward substitution L y = b.
    for (std::size_t c = 0; c < b.cols; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        // Back substitution L' x = y.
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

double cholesky_logdet(const Mat& spd) {
    const Mat l = cholesky(spd);
    double s = 0.0;
    for (std::size_t i = 0; i < spd.rows; ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

Mat lu_solve(Mat a, Mat b) {
    if (a.rows != a.cols || b.rows != a.rows)
        throw ValidationError("lu_solve: dimension mismatch");
    const std::size_t n = a.rows;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::fabs(a(i, col)) > std::fabs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) throw ValidationError("lu_solve: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(col, j), b(piv, j));
        }
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a(i, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
            for (std::size_t j = 0; j < b.cols; ++j) b(i, j) -= f * b(col, j);
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = b(ii, j);
            for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * b(k, j);
            b(ii, j) = s / a(ii, ii);
        }
    }
    return b;
}

EigResult jacobi_eigh(Mat sym, int max_sweeps) {
    if (sym.rows != sym.cols) throw ValidationError("jacobi_eigh: matrix not square");
    const std::size_t n = sym.rows;
    Mat v = identity(n);
    if (n == 0) return {{}, v};

    double scale = 0.0;
    for (double x : sym.a) scale = std::max(scale, std::fabs(x));
    if (scale == 0.0) scale = 1.0;
    const double stop = 1e-15 * scale;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(sym(p, q)));
        if (off < stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = sym(p, q);
                if (std::fabs(apq) < stop * 1e-2) continue;
                const double app = sym(p, p), aqq = sym(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = sym(k, p), akq = sym(k, q);
                    sym(k, p) = c * akp - s * akq;
                    sym(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = sym(p, k), aqk = sym(q, k);
                    sym(p, k) = c * apk - s * aqk;
                    sym(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = sym(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return diag[a] > diag[b]; });

    EigResult out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

std::size_t mgs_orthonormalize(Mat& q, double tol) {
    const std::size_t n = q.rows, m = q.cols;
    std::size_t rank = 0;
    for (std::size_t j = 0; j < m; ++j) {
        double norm0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm0 += q(i, j) * q(i, j);
        norm0 = std::sqrt(norm0);
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
            for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
        }
        // Second pass for stability.
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
            for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        if (norm <= tol * std::max(1.0, norm0)) {
            for (std::size_t i = 0; i < n; ++i) q(i, j) = 0.0;
        } else {
            for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
            ++rank;
        }
    }
    return rank;
}

}  // namespace cipred::linalg

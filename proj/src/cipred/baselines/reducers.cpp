#include "cipred/baselines/reducers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cipred/core/linalg.hpp"
#include "cipred/core/rng.hpp"
#include "cipred/core/threading.hpp"
#include "cipred/kernels/kernels.hpp"

namespace cipred::baselines {

using linalg::Mat;

std::string reducer_name(ReducerMethod m) {
    switch (m) {
        case ReducerMethod::pca: return "pca";
        case ReducerMethod::grp: return "grp";
        case ReducerMethod::rfe: return "rfe";
        case ReducerMethod::ufs: return "ufs";
    }
    return "?";
}

ReducerMethod reducer_from_name(const std::string& s) {
    if (s == "pca") return ReducerMethod::pca;
    if (s == "grp") return ReducerMethod::grp;
    if (s == "rfe") return ReducerMethod::rfe;
    if (s == "ufs") return ReducerMethod::ufs;
    throw ValidationError("unknown reducer '" + s + "'");
}

namespace {

constexpr int kExactEigenLimit = 384;

std::vector<double> column_means(const FeatureMatrix& X) {
    std::vector<double> mean(X.p, 0.0);
    for (int i = 0; i < X.n; ++i) {
        const float* r = X.row(i);
        for (int j = 0; j < X.p; ++j) mean[j] += r[j];
    }
    for (auto& m : mean) m /= std::max(1, X.n);
    return mean;
}

// Deterministic orthonormal padding for rank-deficient inputs.
void pad_components(std::vector<double>& comp, int p, int from_col, int k,
                    std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x9ad));
    for (int c = from_col; c < k; ++c) {
        std::vector<double> v(p);
        for (auto& x : v) x = rng.normal();
        for (int done = 0; done < 2; ++done) {
            for (int prev = 0; prev < c; ++prev) {
                double dot = 0.0;
                for (int j = 0; j < p; ++j) dot += v[j] * comp[static_cast<std::size_t>(j) * k + prev];
                for (int j = 0; j < p; ++j) v[j] -= dot * comp[static_cast<std::size_t>(j) * k + prev];
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (int j = 0; j < p; ++j) comp[static_cast<std::size_t>(j) * k + c] = v[j] / norm;
    }
}

// Gram matrix G = Xc Xc' in double precision (n x n).
Mat gram_centered(const FeatureMatrix& X, const std::vector<double>& mean) {
    const int n = X.n, p = X.p;
    // Centered rows as float for the fast dot kernels; the accumulation is
    // double inside sdot_acc.
    std::vector<float> xc(static_cast<std::size_t>(n) * p);
    for (int i = 0; i < n; ++i) {
        const float* src = X.row(i);
        float* dst = xc.data() + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j) dst[j] = static_cast<float>(src[j] - mean[j]);
    }
    Mat g(n, n);
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const float* ri = xc.data() + static_cast<std::size_t>(i) * p;
            for (std::int64_t l = i; l < n; ++l) {
                const double v = kernels::ops().sdot_acc(
                    static_cast<std::size_t>(p), ri,
                    xc.data() + static_cast<std::size_t>(l) * p);
                g(static_cast<std::size_t>(i), static_cast<std::size_t>(l)) = v;
                g(static_cast<std::size_t>(l), static_cast<std::size_t>(i)) = v;
            }
        }
    });
    return g;
}

// Leading eigenpairs of a symmetric n x n matrix by blocked subspace
// iteration with Rayleigh-Ritz extraction.
void leading_eigs(const Mat& g, int k, std::uint64_t seed, std::vector<double>& values,
                  Mat& vectors) {
    const int n = static_cast<int>(g.rows);
    const int b = std::min(n, k + 8);
    Mat q(n, b);
    Rng rng(derive_seed(seed, 0x5b));
    for (auto& v : q.a) v = rng.normal();
    linalg::mgs_orthonormalize(q);

    std::vector<double> prev(k, 0.0);
    Mat y(n, b);
    for (int iter = 0; iter < 200; ++iter) {
        // y = g * q, row-blocked, inner loop contiguous over the block.
        parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                double* yi = &y.a[static_cast<std::size_t>(i) * b];
                std::fill(yi, yi + b, 0.0);
                const double* gi = &g.a[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) {
                    const double gij = gi[j];
                    if (gij == 0.0) continue;
                    const double* qj = &q.a[static_cast<std::size_t>(j) * b];
                    for (int t = 0; t < b; ++t) yi[t] += gij * qj[t];
                }
            }
        });
        // Rayleigh-Ritz block: s = q' y.
        Mat s(b, b);
        for (int i = 0; i < n; ++i) {
            const double* qi = &q.a[static_cast<std::size_t>(i) * b];
            const double* yi = &y.a[static_cast<std::size_t>(i) * b];
            for (int r = 0; r < b; ++r)
                for (int c = 0; c < b; ++c) s(r, c) += qi[r] * yi[c];
        }
        for (int r = 0; r < b; ++r)
            for (int c = r + 1; c < b; ++c) {
                const double avg = 0.5 * (s(r, c) + s(c, r));
                s(r, c) = s(c, r) = avg;
            }
        const auto eig = linalg::jacobi_eigh(s);

        double rel_change = 0.0;
        for (int t = 0; t < k; ++t) {
            const double denom = std::max(std::fabs(eig.values[t]), 1e-300);
            rel_change = std::max(rel_change, std::fabs(eig.values[t] - prev[t]) / denom);
            prev[t] = eig.values[t];
        }

        // Rotate the iterate onto the Ritz directions and re-orthonormalize.
        Mat next(n, b);
        for (int i = 0; i < n; ++i) {
            const double* yi = &y.a[static_cast<std::size_t>(i) * b];
            double* ni = &next.a[static_cast<std::size_t>(i) * b];
            for (int c = 0; c < b; ++c) {
                double acc = 0.0;
                for (int r = 0; r < b; ++r) acc += yi[r] * eig.vectors(r, c);
                ni[c] = acc;
            }
        }
        q = next;
        linalg::mgs_orthonormalize(q);
        if (rel_change < 1e-11 && iter >= 3) break;
    }

    // Final Rayleigh-Ritz on the converged block.
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            double* yi = &y.a[static_cast<std::size_t>(i) * b];
            std::fill(yi, yi + b, 0.0);
            const double* gi = &g.a[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                const double gij = gi[j];
                if (gij == 0.0) continue;
                const double* qj = &q.a[static_cast<std::size_t>(j) * b];
                for (int t = 0; t < b; ++t) yi[t] += gij * qj[t];
            }
        }
    });
    Mat s(b, b);
    for (int i = 0; i < n; ++i) {
        const double* qi = &q.a[static_cast<std::size_t>(i) * b];
        const double* yi = &y.a[static_cast<std::size_t>(i) * b];
        for (int r = 0; r < b; ++r)
            for (int c = 0; c < b; ++c) s(r, c) += qi[r] * yi[c];
    }
    for (int r = 0; r < b; ++r)
        for (int c = r + 1; c < b; ++c) {
            const double avg = 0.5 * (s(r, c) + s(c, r));
            s(r, c) = s(c, r) = avg;
        }
    const auto eig = linalg::jacobi_eigh(s);

    values.assign(eig.values.begin(), eig.values.begin() + k);
    vectors = Mat(n, k);
    for (int i = 0; i < n; ++i) {
        const double* qi = &q.a[static_cast<std::size_t>(i) * b];
        for (int c = 0; c < k; ++c) {
            double acc = 0.0;
            for (int r = 0; r < b; ++r) acc += qi[r] * eig.vectors(r, c);
            vectors(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = acc;
        }
    }
}

FittedReducer fit_pca(const FeatureMatrix& X, int k, std::uint64_t seed) {
    const int n = X.n, p = X.p;
    if (k < 1 || k > std::min(n - 1, p))
        throw ValidationError("pca output dimension out of range");
    FittedReducer r;
    r.method = ReducerMethod::pca;
    r.k = k;
    r.p_in = p;
    r.mean = column_means(X);

    // Total variance = trace of the covariance.
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = X.row(i);
        for (int j = 0; j < p; ++j) {
            const double d = row[j] - r.mean[j];
            total += d * d;
        }
    }
    r.total_variance = total / std::max(1, n - 1);

    r.components.assign(static_cast<std::size_t>(p) * k, 0.0);
    r.explained_variance.assign(k, 0.0);

    int rank = 0;
    if (p <= kExactEigenLimit) {
        // Covariance eigendecomposition.
        Mat cov(p, p);
        for (int i = 0; i < n; ++i) {
            const float* row = X.row(i);
            for (int a = 0; a < p; ++a) {
                const double da = row[a] - r.mean[a];
                for (int b2 = a; b2 < p; ++b2)
                    cov(a, b2) += da * (row[b2] - r.mean[b2]);
            }
        }
        for (int a = 0; a < p; ++a)
            for (int b2 = 0; b2 < a; ++b2) cov(a, b2) = cov(b2, a);
        for (auto& v : cov.a) v /= std::max(1, n - 1);
        const auto eig = linalg::jacobi_eigh(cov);
        const double tol = std::max(eig.values[0], 0.0) * 1e-12 + 1e-300;
        for (int c = 0; c < k; ++c) {
            if (eig.values[c] > tol) {
                for (int j = 0; j < p; ++j)
                    r.components[static_cast<std::size_t>(j) * k + c] = eig.vectors(j, c);
                r.explained_variance[c] = eig.values[c];
                ++rank;
            } else {
                break;
            }
        }
    } else {
        // Gram-side route: eigenvectors u of Xc Xc' give components
        // v = Xc' u / s.
        const Mat g = gram_centered(X, r.mean);
        std::vector<double> lambda;
        Mat u;
        if (n <= kExactEigenLimit) {
            const auto eig = linalg::jacobi_eigh(g);
            lambda.assign(eig.values.begin(), eig.values.begin() + k);
            u = Mat(n, k);
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < k; ++c) u(i, c) = eig.vectors(i, c);
        } else {
            leading_eigs(g, k, seed, lambda, u);
        }
        const double tol = std::max(lambda[0], 0.0) * 1e-12 + 1e-300;
        for (int c = 0; c < k && lambda[c] > tol; ++c) ++rank;

        // components = Xc' U diag(1/s); accumulate row blocks in double.
        for (int i = 0; i < n; ++i) {
            const float* row = X.row(i);
            for (int j = 0; j < p; ++j) {
                const double xc = row[j] - r.mean[j];
                if (xc == 0.0) continue;
                double* comp_row = &r.components[static_cast<std::size_t>(j) * k];
                const double* ui = &u.a[static_cast<std::size_t>(i) * k];
                for (int c = 0; c < rank; ++c) comp_row[c] += xc * ui[c];
            }
        }
        for (int c = 0; c < rank; ++c) {
            const double s = std::sqrt(std::max(lambda[c], 0.0));
            const double inv = s > 0 ? 1.0 / s : 0.0;
            for (int j = 0; j < p; ++j)
                r.components[static_cast<std::size_t>(j) * k + c] *= inv;
            r.explained_variance[c] = lambda[c] / std::max(1, n - 1);
        }
        // Polish: exact orthonormality of the kept columns.
        Mat vm(p, rank);
        for (int j = 0; j < p; ++j)
            for (int c = 0; c < rank; ++c)
                vm(j, c) = r.components[static_cast<std::size_t>(j) * k + c];
        linalg::mgs_orthonormalize(vm);
        for (int j = 0; j < p; ++j)
            for (int c = 0; c < rank; ++c)
                r.components[static_cast<std::size_t>(j) * k + c] = vm(j, c);
    }

    if (rank < k) {
        pad_components(r.components, p, rank, k, seed);
        r.padded = true;
    }
    return r;
}

FittedReducer fit_grp(const FeatureMatrix& X, int k, std::uint64_t seed) {
    if (k < 1 || k > X.p) throw ValidationError("grp output dimension out of range");
    FittedReducer r;
    r.method = ReducerMethod::grp;
    r.k = k;
    r.p_in = X.p;
    r.projection.resize(static_cast<std::size_t>(X.p) * k);
    Rng rng(derive_seed(seed, 0x6e9));
    const double sd = 1.0 / std::sqrt(static_cast<double>(k));
    for (auto& v : r.projection) v = static_cast<float>(sd * rng.normal());
    return r;
}

}  // namespace

std::vector<double> anova_f_scores(const FeatureMatrix& X, const std::vector<int>& y) {
    if (static_cast<int>(y.size()) != X.n)
        throw ValidationError("label count does not match feature rows");
    int n1 = 0;
    for (int v : y) n1 += v;
    const int n0 = X.n - n1;
    if (n0 == 0 || n1 == 0) throw ValidationError("ANOVA scores need both classes");

    std::vector<double> sum0(X.p, 0.0), sum1(X.p, 0.0), ss(X.p, 0.0);
    for (int i = 0; i < X.n; ++i) {
        const float* row = X.row(i);
        auto& target = y[static_cast<std::size_t>(i)] ? sum1 : sum0;
        for (int j = 0; j < X.p; ++j) {
            target[j] += row[j];
            ss[j] += static_cast<double>(row[j]) * row[j];
        }
    }
    std::vector<double> f(X.p);
    const int n = X.n;
    for (int j = 0; j < X.p; ++j) {
        const double m0 = sum0[j] / n0, m1 = sum1[j] / n1;
        const double grand = (sum0[j] + sum1[j]) / n;
        const double ssb = n0 * (m0 - grand) * (m0 - grand) + n1 * (m1 - grand) * (m1 - grand);
        const double sst = ss[j] - n * grand * grand;
        const double ssw = std::max(0.0, sst - ssb);
        if (ssw <= 1e-30)
            f[j] = ssb > 1e-30 ? std::numeric_limits<double>::infinity() : 0.0;
        else
            f[j] = (ssb / 1.0) / (ssw / (n - 2));
    }
    return f;
}

namespace {

FittedReducer fit_ufs(const FeatureMatrix& X, int k, const std::vector<int>& y,
                      const ReducerOptions& opts) {
    if (k < 1 || k > X.p) throw ValidationError("ufs output dimension out of range");
    std::vector<double> score;
    if (opts.ufs_mutual_info) {
        // Binned mutual information with the class variable.
        const int bins = 8;
        score.resize(X.p);
        int n1 = 0;
        for (int v : y) n1 += v;
        const double py[2] = {double(X.n - n1) / X.n, double(n1) / X.n};
        for (int j = 0; j < X.p; ++j) {
            float lo = X.row(0)[j], hi = lo;
            for (int i = 1; i < X.n; ++i) {
                lo = std::min(lo, X.row(i)[j]);
                hi = std::max(hi, X.row(i)[j]);
            }
            double joint[bins][2] = {};
            const double width = hi > lo ? (hi - lo) / bins : 1.0;
            for (int i = 0; i < X.n; ++i) {
                int b = hi > lo ? static_cast<int>((X.row(i)[j] - lo) / width) : 0;
                b = std::min(b, bins - 1);
                joint[b][y[static_cast<std::size_t>(i)]] += 1.0 / X.n;
            }
            double mi = 0.0;
            for (int b = 0; b < bins; ++b) {
                const double pb = joint[b][0] + joint[b][1];
                for (int c = 0; c < 2; ++c)
                    if (joint[b][c] > 0)
                        mi += joint[b][c] * std::log(joint[b][c] / (pb * py[c]));
            }
            score[j] = mi;
        }
    } else {
        score = anova_f_scores(X, y);
    }

    std::vector<int> order(X.p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return a < b;  // ties by lower index
    });
    FittedReducer r;
    r.method = ReducerMethod::ufs;
    r.k = k;
    r.p_in = X.p;
    r.selected.assign(order.begin(), order.begin() + k);
    std::sort(r.selected.begin(), r.selected.end());
    return r;
}

FittedReducer fit_rfe(const FeatureMatrix& X, int k, const std::vector<int>& y,
                      const ReducerOptions& opts) {
    if (k < 1 || k > X.p) throw ValidationError("rfe output dimension out of range");
    const int n = X.n, p = X.p;

    // Standardized copy for the ridge ranker.
    std::vector<double> mean(p, 0.0), sd(p, 0.0);
    for (int i = 0; i < n; ++i) {
        const float* row = X.row(i);
        for (int j = 0; j < p; ++j) mean[j] += row[j];
    }
    for (auto& m : mean) m /= n;
    for (int i = 0; i < n; ++i) {
        const float* row = X.row(i);
        for (int j = 0; j < p; ++j) sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    }
    for (auto& s : sd) {
        s = std::sqrt(s / std::max(1, n - 1));
        if (s < 1e-12) s = 1.0;
    }
    std::vector<float> z(static_cast<std::size_t>(n) * p);
    for (int i = 0; i < n; ++i) {
        const float* row = X.row(i);
        float* dst = z.data() + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j)
            dst[j] = static_cast<float>((row[j] - mean[j]) / sd[j]);
    }
    std::vector<double> ypm(n);
    for (int i = 0; i < n; ++i) ypm[i] = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;

    std::vector<int> active(p);
    std::iota(active.begin(), active.end(), 0);

    const bool dual = p > n;
    Mat gram;
    if (dual) {
        gram = Mat(n, n);
        parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i)
                for (std::int64_t l = i; l < n; ++l) {
                    const double v = kernels::ops().sdot_acc(
                        static_cast<std::size_t>(p),
                        z.data() + static_cast<std::size_t>(i) * p,
                        z.data() + static_cast<std::size_t>(l) * p);
                    gram(static_cast<std::size_t>(i), static_cast<std::size_t>(l)) = v;
                    gram(static_cast<std::size_t>(l), static_cast<std::size_t>(i)) = v;
                }
        });
    }

    while (static_cast<int>(active.size()) > k) {
        const int s_cnt = static_cast<int>(active.size());
        std::vector<double> coef(s_cnt, 0.0);
        if (dual && s_cnt > n) {
            Mat a = gram;
            for (int i = 0; i < n; ++i) a(i, i) += opts.rfe_lambda;
            Mat rhs(n, 1);
            for (int i = 0; i < n; ++i) rhs(i, 0) = ypm[i];
            const Mat alpha = linalg::cholesky_solve(a, rhs);
            // w_j = x_j' alpha over active columns.
            for (int jj = 0; jj < s_cnt; ++jj) {
                const int j = active[jj];
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    acc += static_cast<double>(z[static_cast<std::size_t>(i) * p + j]) *
                           alpha(i, 0);
                coef[jj] = acc;
            }
        } else {
            Mat xtx(s_cnt, s_cnt);
            Mat xty(s_cnt, 1);
            for (int i = 0; i < n; ++i) {
                const float* zi = z.data() + static_cast<std::size_t>(i) * p;
                for (int a1 = 0; a1 < s_cnt; ++a1) {
                    const double va = zi[active[a1]];
                    xty(a1, 0) += va * ypm[i];
                    for (int b1 = a1; b1 < s_cnt; ++b1)
                        xtx(a1, b1) += va * zi[active[b1]];
                }
            }
            for (int a1 = 0; a1 < s_cnt; ++a1) {
                for (int b1 = 0; b1 < a1; ++b1) xtx(a1, b1) = xtx(b1, a1);
                xtx(a1, a1) += opts.rfe_lambda;
            }
            const Mat w = linalg::cholesky_solve(xtx, xty);
            for (int a1 = 0; a1 < s_cnt; ++a1) coef[a1] = w(a1, 0);
        }

        const int drop = std::min(std::max(1, s_cnt / 10), s_cnt - k);
        std::vector<int> order(s_cnt);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const double fa = std::fabs(coef[a]), fb = std::fabs(coef[b]);
            if (fa != fb) return fa < fb;
            return active[a] < active[b];
        });
        std::vector<char> dead(s_cnt, 0);
        for (int d = 0; d < drop; ++d) dead[order[d]] = 1;

        if (dual) {
            // Downdate the Gram matrix by the removed columns.
            for (int d = 0; d < drop; ++d) {
                const int j = active[order[d]];
                std::vector<double> colv(n);
                for (int i = 0; i < n; ++i)
                    colv[i] = z[static_cast<std::size_t>(i) * p + j];
                for (int i = 0; i < n; ++i) {
                    const double vi = colv[i];
                    if (vi == 0.0) continue;
                    double* gi = &gram.a[static_cast<std::size_t>(i) * n];
                    for (int l = 0; l < n; ++l) gi[l] -= vi * colv[l];
                }
            }
        }
        std::vector<int> next;
        next.reserve(s_cnt - drop);
        for (int a1 = 0; a1 < s_cnt; ++a1)
            if (!dead[a1]) next.push_back(active[a1]);
        active = std::move(next);
    }

    FittedReducer r;
    r.method = ReducerMethod::rfe;
    r.k = k;
    r.p_in = p;
    r.selected = active;
    std::sort(r.selected.begin(), r.selected.end());
    return r;
}

}  // namespace

FittedReducer fit_reducer(ReducerMethod method, const FeatureMatrix& X, int k,
                          std::uint64_t seed, const std::vector<int>* y,
                          const ReducerOptions& opts) {
    if (X.n < 2) throw ValidationError("reducer fit needs at least 2 samples");
    switch (method) {
        case ReducerMethod::pca: return fit_pca(X, k, seed);
        case ReducerMethod::grp: return fit_grp(X, k, seed);
        case ReducerMethod::ufs:
            if (!y) throw ValidationError("ufs needs labels");
            return fit_ufs(X, k, *y, opts);
        case ReducerMethod::rfe:
            if (!y) throw ValidationError("rfe needs labels");
            return fit_rfe(X, k, *y, opts);
    }
    throw ValidationError("unknown reducer method");
}

FeatureMatrix apply_reducer(const FittedReducer& r, const FeatureMatrix& X) {
    if (X.p != r.p_in) throw ValidationError("reducer input width mismatch");
    FeatureMatrix out;
    out.n = X.n;
    out.p = r.k;
    out.keys = X.keys;
    out.x.assign(static_cast<std::size_t>(X.n) * r.k, 0.0f);

    switch (r.method) {
        case ReducerMethod::pca: {
            // (x - mean) * components via the float GEMM; the components are
            // cast once.
            std::vector<float> comp(r.components.size());
            for (std::size_t i = 0; i < comp.size(); ++i)
                comp[i] = static_cast<float>(r.components[i]);
            std::vector<float> xc(static_cast<std::size_t>(X.n) * X.p);
            for (int i = 0; i < X.n; ++i) {
                const float* src = X.row(i);
                float* dst = xc.data() + static_cast<std::size_t>(i) * X.p;
                for (int j = 0; j < X.p; ++j)
                    dst[j] = static_cast<float>(src[j] - r.mean[j]);
            }
            kernels::sgemm_parallel(static_cast<std::size_t>(X.n),
                                    static_cast<std::size_t>(r.k),
                                    static_cast<std::size_t>(X.p), xc.data(),
                                    comp.data(), out.x.data(), false);
            break;
        }
        case ReducerMethod::grp:
            kernels::sgemm_parallel(static_cast<std::size_t>(X.n),
                                    static_cast<std::size_t>(r.k),
                                    static_cast<std::size_t>(X.p), X.x.data(),
                                    r.projection.data(), out.x.data(), false);
            break;
        case ReducerMethod::rfe:
        case ReducerMethod::ufs:
            for (int i = 0; i < X.n; ++i) {
                const float* src = X.row(i);
                float* dst = out.row(i);
                for (int c = 0; c < r.k; ++c) dst[c] = src[r.selected[static_cast<std::size_t>(c)]];
            }
            break;
    }
    return out;
}

}  // namespace cipred::baselines

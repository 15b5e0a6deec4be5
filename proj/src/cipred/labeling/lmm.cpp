#include "cipred/labeling/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace cipred::labeling {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Per-subject sufficient statistics. With Z = [1, t] and the decomposition
// y = Z a + e (a the OLS coefficients, e the orthogonal residual),
// V = sigma2 I + Z Psi Z' acts as sigma2 on e and as the 2x2 map
// M = sigma2 I + Psi (Z'Z) on span(Z) coordinates. Every REML/BLUP quantity
// reduces to 2x2 algebra plus ||e||^2, which stays numerically stable even
// when sigma2 is driven to its floor on noiseless data:
//   u' V^-1 w   = a_u' (Z'Z) M^-1 a_w + (e_u . e_w) / sigma2
//   log|V|      = (n - 2) log sigma2 + log det M
//   b_hat       = Psi (Z'Z) M^-1 a_(y - beta0*1)
struct SubjectStats {
    double n = 0;
    double st = 0, stt = 0;    // sum t, sum t^2
    double a0 = 0, a1 = 0;     // OLS coefficients of y on [1, t]
    double ssq_e = 0;          // squared norm of the OLS residual
};

struct Mat2 {
    double m00 = 0, m01 = 0, m10 = 0, m11 = 0;
};

Mat2 mul(const Mat2& a, const Mat2& b) {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
}

Mat2 inv(const Mat2& a) {
    const double det = a.m00 * a.m11 - a.m01 * a.m10;
    if (det == 0.0 || !std::isfinite(det))
        throw ValidationError("singular 2x2 system in mixed-model algebra");
    return {a.m11 / det, -a.m01 / det, -a.m10 / det, a.m00 / det};
}

SubjectStats subject_stats(const LongitudinalSeries& s) {
    s.validate();
    SubjectStats st;
    st.n = static_cast<double>(s.observations.size());
    double sy = 0, sty = 0;
    for (const auto& o : s.observations) {
        st.st += o.time_months;
        st.stt += o.time_months * o.time_months;
        sy += o.score;
        sty += o.time_months * o.score;
    }
    const double det = st.n * st.stt - st.st * st.st;
    if (det <= 0.0)
        throw ValidationError("degenerate time design for subject " + s.subject_id);
    st.a1 = (st.n * sty - st.st * sy) / det;
    st.a0 = (sy - st.a1 * st.st) / st.n;
    for (const auto& o : s.observations) {
        const double e = o.score - st.a0 - st.a1 * o.time_months;
        st.ssq_e += e * e;
    }
    return st;
}

// Symmetric bilinear-form matrix B = Z' V^-1 Z = (Z'Z) M^-1 and log det M.
struct FormPieces {
    Mat2 b;          // symmetrized (Z'Z) M^-1
    double logdet_m = 0;
};

FormPieces form_pieces(const SubjectStats& s, const linalg::Mat& psi, double sigma2) {
    const Mat2 ztz{s.n, s.st, s.st, s.stt};
    const Mat2 psi2{psi(0, 0), psi(0, 1), psi(1, 0), psi(1, 1)};
    Mat2 m = mul(psi2, ztz);
    m.m00 += sigma2;
    m.m11 += sigma2;
    const double det_m = m.m00 * m.m11 - m.m01 * m.m10;
    if (!(det_m > 0.0))
        throw ValidationError("non-positive determinant in mixed-model algebra");
    FormPieces out;
    Mat2 b = mul(ztz, inv(m));
    const double off = 0.5 * (b.m01 + b.m10);
    b.m01 = b.m10 = off;  // exact symmetry up to rounding
    out.b = b;
    out.logdet_m = std::log(det_m);
    return out;
}

double reml_value(const std::vector<SubjectStats>& stats, const linalg::Mat& psi,
                  double sigma2, double total_obs) {
    double logdet_sum = 0;
    double xtvx = 0, xtvy = 0, ytvy = 0;
    for (const auto& s : stats) {
        const FormPieces f = form_pieces(s, psi, sigma2);
        logdet_sum += (s.n - 2.0) * std::log(sigma2) + f.logdet_m;
        // a_1 = (1, 0); a_y = (a0, a1).
        xtvx += f.b.m00;
        xtvy += f.b.m00 * s.a0 + f.b.m01 * s.a1;
        ytvy += s.a0 * (f.b.m00 * s.a0 + f.b.m01 * s.a1) +
                s.a1 * (f.b.m10 * s.a0 + f.b.m11 * s.a1) + s.ssq_e / sigma2;
    }
    if (!(xtvx > 0.0)) return -std::numeric_limits<double>::infinity();
    const double beta0 = xtvy / xtvx;
    const double quad = ytvy - beta0 * xtvy;
    return -0.5 * (logdet_sum + std::log(xtvx) + quad + (total_obs - 1.0) * kLog2Pi);
}

double beta0_at(const std::vector<SubjectStats>& stats, const linalg::Mat& psi,
                double sigma2) {
    double xtvx = 0, xtvy = 0;
    for (const auto& s : stats) {
        const FormPieces f = form_pieces(s, psi, sigma2);
        xtvx += f.b.m00;
        xtvy += f.b.m00 * s.a0 + f.b.m01 * s.a1;
    }
    if (!(xtvx > 0.0)) throw ValidationError("degenerate GLS system");
    return xtvy / xtvx;
}

std::vector<SubjectStats> collect(const std::vector<LongitudinalSeries>& series) {
    std::vector<SubjectStats> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back(subject_stats(s));
    return out;
}

// theta = (log sigma, l11, l21, l22) with Psi = L L', L lower triangular and
// exp() on the diagonal; guarantees PSD iterates.
struct ThetaMap {
    bool diag = false;
    double sigma_floor = 1e-9;
    double chol_floor = 1e-9;
    double cap = 1e9;

    int dim() const { return diag ? 3 : 4; }

    void unpack(const std::vector<double>& th, linalg::Mat& psi, double& sigma2) const {
        const double sig = std::min(cap, std::max(sigma_floor, std::exp(th[0])));
        sigma2 = sig * sig;
        const double l11 = std::min(cap, std::max(chol_floor, std::exp(th[1])));
        const double l21 = diag ? 0.0 : std::max(-cap, std::min(cap, th[2]));
        const double l22 =
            std::min(cap, std::max(chol_floor, std::exp(th[diag ? 2 : 3])));
        psi = linalg::Mat(2, 2);
        psi(0, 0) = l11 * l11;
        psi(0, 1) = psi(1, 0) = l11 * l21;
        psi(1, 1) = l21 * l21 + l22 * l22;
    }
};

struct SimplexResult {
    std::vector<double> best_x;
    double best_f = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Nelder-Mead maximization; stops when the simplex value spread drops below
// tol or after max_iters iterations.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, double tol,
                          int max_iters) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> xs(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += step;
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    SimplexResult res;
    int iter = 0;
    for (; iter < max_iters; ++iter) {
        std::vector<std::size_t> ord(n + 1);
        std::iota(ord.begin(), ord.end(), 0);
        std::stable_sort(ord.begin(), ord.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] > fs[b]; });
        const std::size_t best = ord[0], worst = ord[n], second_worst = ord[n - 1];
        if (std::fabs(fs[best] - fs[worst]) < tol) {
            res.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += xs[i][d] / n;
        }
        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + coef * (xs[worst][d] - centroid[d]);
            return p;
        };
        const std::vector<double> refl = blend(-1.0);
        const double f_refl = f(refl);
        if (f_refl > fs[best]) {
            const std::vector<double> expd = blend(-2.0);
            const double f_expd = f(expd);
            if (f_expd > f_refl) {
                xs[worst] = expd;
                fs[worst] = f_expd;
            } else {
                xs[worst] = refl;
                fs[worst] = f_refl;
            }
        } else if (f_refl > fs[second_worst]) {
            xs[worst] = refl;
            fs[worst] = f_refl;
        } else {
            const std::vector<double> contr = blend(f_refl > fs[worst] ? -0.5 : 0.5);
            const double f_contr = f(contr);
            if (f_contr > std::max(f_refl, fs[worst])) {
                xs[worst] = contr;
                fs[worst] = f_contr;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        xs[i][d] = xs[best][d] + 0.5 * (xs[i][d] - xs[best][d]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] > fs[best]) best = i;
    res.best_x = xs[best];
    res.best_f = fs[best];
    res.iterations = iter;
    return res;
}

double sample_var(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / (v.size() - 1);
}

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2) return 0.0;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - ma) * (b[i] - mb);
    return ss / (a.size() - 1);
}

}  // namespace

double restricted_loglik(const std::vector<LongitudinalSeries>& series,
                         const linalg::Mat& psi, double sigma2) {
    const auto stats = collect(series);
    double total = 0;
    for (const auto& s : stats) total += s.n;
    return reml_value(stats, psi, sigma2, total);
}

double profiled_beta0(const std::vector<LongitudinalSeries>& series,
                      const linalg::Mat& psi, double sigma2) {
    return beta0_at(collect(series), psi, sigma2);
}

std::vector<std::pair<double, double>> blups_given_theta(
    const std::vector<LongitudinalSeries>& series, double beta0,
    const linalg::Mat& psi, double sigma2) {
    std::vector<std::pair<double, double>> out;
    out.reserve(series.size());
    for (const auto& s : series) {
        const SubjectStats st = subject_stats(s);
        const Mat2 ztz{st.n, st.st, st.st, st.stt};
        const Mat2 psi2{psi(0, 0), psi(0, 1), psi(1, 0), psi(1, 1)};
        Mat2 m = mul(psi2, ztz);
        m.m00 += sigma2;
        m.m11 += sigma2;
        // b = Psi (Z'Z) M^-1 a_u with a_u the OLS coefficients of y - beta0.
        const Mat2 k = mul(psi2, mul(ztz, inv(m)));
        const double au0 = st.a0 - beta0, au1 = st.a1;
        out.emplace_back(k.m00 * au0 + k.m01 * au1, k.m10 * au0 + k.m11 * au1);
    }
    return out;
}

LmmFit fit_lmm(const std::vector<LongitudinalSeries>& series, const FitOptions& opts) {
    if (series.size() < 3)
        throw ValidationError("mixed model fit needs at least 3 subjects");
    const auto stats = collect(series);
    double total_obs = 0;
    double rss = 0, dof = 0, y_abs = 0, y_n = 0;
    std::vector<double> intercepts, slopes;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        total_obs += stats[i].n;
        intercepts.push_back(stats[i].a0);
        slopes.push_back(stats[i].a1);
        rss += stats[i].ssq_e;
        if (stats[i].n > 2) dof += stats[i].n - 2;
        for (const auto& o : series[i].observations) {
            y_abs += std::fabs(o.score);
            y_n += 1;
        }
    }
    const double y_scale = y_n > 0 ? std::max(1e-12, y_abs / y_n) : 1.0;

    ThetaMap map;
    map.diag = opts.diag_psi;
    map.sigma_floor = 1e-8 * y_scale;
    map.chol_floor = 1e-8 * y_scale;

    // Method-of-moments start: covariance of the per-subject OLS coefficients
    // and the pooled residual variance.
    const double var_int = std::max(sample_var(intercepts), 1e-8 * y_scale * y_scale);
    const double var_slope = std::max(sample_var(slopes), 1e-10 * y_scale * y_scale);
    const double sigma2_0 =
        std::max(dof > 0 ? rss / dof : 0.0, 1e-6 * y_scale * y_scale);

    std::vector<double> th0;
    th0.push_back(0.5 * std::log(sigma2_0));
    th0.push_back(0.5 * std::log(var_int));
    if (!map.diag) th0.push_back(sample_cov(intercepts, slopes) / std::sqrt(var_int));
    th0.push_back(0.5 * std::log(var_slope));

    auto objective = [&](const std::vector<double>& th) {
        linalg::Mat psi;
        double sigma2 = 0.0;
        map.unpack(th, psi, sigma2);
        try {
            const double f = reml_value(stats, psi, sigma2, total_obs);
            return std::isfinite(f) ? f : -1e100;
        } catch (const ValidationError&) {
            return -1e100;
        }
    };

    const SimplexResult sol = nelder_mead(objective, th0, 0.5, opts.tol, opts.max_iters);

    LmmFit fit;
    map.unpack(sol.best_x, fit.psi, fit.sigma2);
    fit.loglik = sol.best_f;
    fit.converged = sol.converged;
    fit.iterations = sol.iterations;
    fit.beta0 = beta0_at(stats, fit.psi, fit.sigma2);
    fit.blups = blups_given_theta(series, fit.beta0, fit.psi, fit.sigma2);
    for (const auto& s : series) fit.subject_ids.push_back(s.subject_id);

    const double floor2 = map.sigma_floor * map.sigma_floor * 1.0001;
    const double chol2 = map.chol_floor * map.chol_floor * 1.0001;
    fit.boundary = fit.sigma2 <= floor2 || fit.psi(0, 0) <= chol2 ||
                   fit.psi(1, 1) - fit.psi(0, 1) * fit.psi(0, 1) / fit.psi(0, 0) <= chol2;
    return fit;
}

std::map<std::string, double> blup_slopes(const LmmFit& fit) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < fit.subject_ids.size(); ++i)
        out[fit.subject_ids[i]] = fit.blups[i].second;
    return out;
}

std::map<std::string, Label> median_split(const std::map<std::string, double>& slopes) {
    if (slopes.size() < 2)
        throw ValidationError("median split needs at least 2 subjects per group");
    std::vector<double> vals;
    vals.reserve(slopes.size());
    for (const auto& [id, s] : slopes) vals.push_back(s);
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    const double median =
        (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    std::map<std::string, Label> out;
    for (const auto& [id, s] : slopes)
        out[id] = s > median ? Label::high : Label::low;
    return out;
}

std::map<std::string, Label> median_split_by_group(
    const std::map<std::string, double>& slopes,
    const std::map<std::string, int>& group_of) {
    std::map<int, std::map<std::string, double>> grouped;
    for (const auto& [id, s] : slopes) {
        const auto it = group_of.find(id);
        if (it == group_of.end())
            throw ValidationError("no group for subject " + id);
        grouped[it->second][id] = s;
    }
    std::map<std::string, Label> out;
    for (auto& [g, m] : grouped)
        for (const auto& [id, lab] : median_split(m)) out[id] = lab;
    return out;
}

CohortLabels label_cohort(CohortDataset& cohort, const FitOptions& opts) {
    CohortLabels result;
    for (const Center c : {Center::A, Center::B, Center::C}) {
        std::vector<LongitudinalSeries> series;
        for (const auto& s : cohort.subjects)
            if (s.record.center == c) series.push_back(s.series);
        if (series.empty()) continue;
        LmmFit fit = fit_lmm(series, opts);
        auto slopes = blup_slopes(fit);
        auto labels = median_split(slopes);
        for (const auto& [id, sl] : slopes) result.slopes[id] = sl;
        for (const auto& [id, lab] : labels) result.labels[id] = lab;
        result.fits.emplace(c, std::move(fit));
    }
    for (auto& subj : cohort.subjects) {
        const auto it = result.labels.find(subj.record.subject_id);
        if (it == result.labels.end())
            throw ValidationError("labeling missed subject " + subj.record.subject_id);
        subj.label = it->second;
    }
    return result;
}

}  // namespace cipred::labeling

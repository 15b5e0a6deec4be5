#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "cipred/core/rng.hpp"
#include "cipred/labeling/lmm.hpp"

using namespace cipred;
using namespace cipred::labeling;
using cohort::LongitudinalSeries;

namespace {

struct SimCohort {
    std::vector<LongitudinalSeries> series;
    std::vector<double> true_slopes;
    std::vector<double> true_intercepts;
};

SimCohort simulate(int n_subjects, double noise_sd, std::uint64_t seed,
                   std::vector<double> times = {0, 3, 6, 12, 18, 24}) {
    SimCohort out;
    for (int i = 0; i < n_subjects; ++i) {
        Rng rng(derive_seed(seed, 77, static_cast<std::uint64_t>(i)));
        const double intercept = 5.0 + 1.0 * rng.normal();
        const double slope = 1.0 + 0.4 * rng.normal();
        LongitudinalSeries s;
        s.subject_id = "s" + std::to_string(i);
        for (double t : times)
            s.observations.push_back({t, intercept + slope * t + noise_sd * rng.normal()});
        out.series.push_back(std::move(s));
        out.true_slopes.push_back(slope);
        out.true_intercepts.push_back(intercept);
    }
    return out;
}

double ols_slope(const LongitudinalSeries& s) {
    const std::size_t n = s.observations.size();
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (const auto& o : s.observations) {
        st += o.time_months;
        sy += o.score;
        stt += o.time_months * o.time_months;
        sty += o.time_months * o.score;
    }
    return (n * sty - st * sy) / (n * stt - st * st);
}

// Independent GLS oracle: builds V_i densely and inverts it by Gauss-Jordan
// elimination, a different route than the production Cholesky solves.
std::pair<double, double> gls_blup_oracle(const LongitudinalSeries& s, double beta0,
                                          const linalg::Mat& psi, double sigma2) {
    const std::size_t n = s.observations.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    std::vector<double> t(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = s.observations[i].time_months;
        r[i] = s.observations[i].score - beta0;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            v[i][j] = psi(0, 0) + psi(0, 1) * t[j] + psi(1, 0) * t[i] +
                      psi(1, 1) * t[i] * t[j] + (i == j ? sigma2 : 0.0);
    // Gauss-Jordan inverse.
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::fabs(v[i][col]) > std::fabs(v[piv][col])) piv = i;
        std::swap(v[col], v[piv]);
        std::swap(inv[col], inv[piv]);
        const double d = v[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            v[col][j] /= d;
            inv[col][j] /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) continue;
            const double f = v[i][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                v[i][j] -= f * v[col][j];
                inv[i][j] -= f * inv[col][j];
            }
        }
    }
    std::vector<double> vinv_r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) vinv_r[i] += inv[i][j] * r[j];
    double z0 = 0, z1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        z0 += vinv_r[i];
        z1 += t[i] * vinv_r[i];
    }
    return {psi(0, 0) * z0 + psi(0, 1) * z1, psi(1, 0) * z0 + psi(1, 1) * z1};
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("noiseless fit recovers per-subject OLS slopes and a tiny sigma2") {
    const SimCohort sim = simulate(50, 0.0, 101);
    const LmmFit fit = fit_lmm(sim.series);
    CHECK(fit.sigma2 < 1e-6);
    const auto slopes = blup_slopes(fit);
    for (const auto& s : sim.series) {
        const double ols = ols_slope(s);
        CHECK(std::fabs(slopes.at(s.subject_id) - ols) < 1e-6);
    }
    // Slopes equal the generating truth in the noiseless case.
    for (std::size_t i = 0; i < sim.series.size(); ++i)
        CHECK(std::fabs(slopes.at(sim.series[i].subject_id) - sim.true_slopes[i]) < 1e-6);
}

TEST_CASE("BLUPs at fixed variance parameters match an independent GLS oracle") {
    const SimCohort sim = simulate(20, 0.5, 202);
    linalg::Mat psi(2, 2);
    psi(0, 0) = 1.0;
    psi(0, 1) = psi(1, 0) = 0.1;
    psi(1, 1) = 0.16;
    const double sigma2 = 0.25;
    const double beta0 = profiled_beta0(sim.series, psi, sigma2);
    const auto blups = blups_given_theta(sim.series, beta0, psi, sigma2);
    for (std::size_t i = 0; i < sim.series.size(); ++i) {
        const auto oracle = gls_blup_oracle(sim.series[i], beta0, psi, sigma2);
        CHECK(std::fabs(blups[i].first - oracle.first) < 1e-10);
        CHECK(std::fabs(blups[i].second - oracle.second) < 1e-10);
    }
}

TEST_CASE("identical constant series produce zero slope BLUPs and a boundary flag") {
    std::vector<LongitudinalSeries> series;
    for (int i = 0; i < 6; ++i) {
        LongitudinalSeries s;
        s.subject_id = "c" + std::to_string(i);
        s.observations = {{0, 4.0}, {6, 4.0}, {12, 4.0}};
        series.push_back(s);
    }
    const LmmFit fit = fit_lmm(series);
    for (const auto& [id, slope] : blup_slopes(fit)) CHECK(std::fabs(slope) < 1e-9);
    CHECK(fit.boundary);
}

TEST_CASE("restricted log-likelihood at the optimum beats random feasible probes") {
    const SimCohort sim = simulate(30, 0.8, 303);
    const LmmFit fit = fit_lmm(sim.series);
    Rng rng(99);
    for (int probe = 0; probe < 20; ++probe) {
        linalg::Mat psi(2, 2);
        const double l11 = std::exp(rng.uniform(-2.0, 1.5));
        const double l21 = rng.uniform(-0.5, 0.5);
        const double l22 = std::exp(rng.uniform(-3.0, 0.5));
        psi(0, 0) = l11 * l11;
        psi(0, 1) = psi(1, 0) = l11 * l21;
        psi(1, 1) = l21 * l21 + l22 * l22;
        const double sigma2 = std::exp(rng.uniform(-4.0, 1.0));
        CHECK(fit.loglik >= restricted_loglik(sim.series, psi, sigma2) - 1e-7);
    }
}

TEST_CASE("slope ranking survives moderate noise") {
    // Noise at half the slope spread barely perturbs the slope ordering:
    // rank correlation with the truth stays above 0.9 on every seed.
    for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
        const SimCohort sim = simulate(40, 0.5 * 0.4, seed);
        const LmmFit fit = fit_lmm(sim.series);
        const auto slopes = blup_slopes(fit);
        std::vector<double> fitted;
        for (const auto& s : sim.series) fitted.push_back(slopes.at(s.subject_id));
        CHECK(spearman(fitted, sim.true_slopes) >= 0.9);
    }
}

TEST_CASE("BLUP slope magnitudes shrink relative to OLS on centered designs") {
    // With per-subject centered times the intercept and slope columns are
    // orthogonal, where diagonal-Psi shrinkage contracts each coordinate.
    const SimCohort sim = simulate(25, 1.0, 404, {-12, -6, 0, 6, 12});
    FitOptions opts;
    opts.diag_psi = true;
    const LmmFit fit = fit_lmm(sim.series, opts);
    CHECK(fit.sigma2 > 0.0);
    const auto slopes = blup_slopes(fit);
    for (const auto& s : sim.series)
        CHECK(std::fabs(slopes.at(s.subject_id)) <= std::fabs(ols_slope(s)) + 1e-9);
}

TEST_CASE("median split rules") {
    std::map<std::string, double> even = {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}};
    auto labels = median_split(even);
    CHECK(labels["a"] == cohort::Label::low);
    CHECK(labels["b"] == cohort::Label::low);
    CHECK(labels["c"] == cohort::Label::high);
    CHECK(labels["d"] == cohort::Label::high);

    std::map<std::string, double> odd = {{"a", 1}, {"b", 2}, {"c", 3}};
    labels = median_split(odd);
    CHECK(labels["a"] == cohort::Label::low);
    CHECK(labels["b"] == cohort::Label::low);  // the median element goes low
    CHECK(labels["c"] == cohort::Label::high);

    std::map<std::string, double> tiny = {{"a", 1}};
    CHECK_THROWS_AS(static_cast<void>(median_split(tiny)), ValidationError);

    // Grouped split keeps groups independent.
    std::map<std::string, double> slopes = {{"a", 1}, {"b", 2}, {"c", 10}, {"d", 20}};
    std::map<std::string, int> groups = {{"a", 0}, {"b", 0}, {"c", 1}, {"d", 1}};
    labels = median_split_by_group(slopes, groups);
    CHECK(labels["a"] == cohort::Label::low);
    CHECK(labels["b"] == cohort::Label::high);
    CHECK(labels["c"] == cohort::Label::low);
    CHECK(labels["d"] == cohort::Label::high);
}

TEST_CASE("labels are invariant to positive affine score transforms") {
    const SimCohort sim = simulate(24, 0.6, 505);
    const LmmFit fit1 = fit_lmm(sim.series);
    const auto labels1 = median_split(blup_slopes(fit1));

    std::vector<LongitudinalSeries> scaled = sim.series;
    for (auto& s : scaled)
        for (auto& o : s.observations) o.score = 7.5 * o.score + 100.0;
    const LmmFit fit2 = fit_lmm(scaled);
    const auto labels2 = median_split(blup_slopes(fit2));
    CHECK(labels1 == labels2);
}

TEST_CASE("fit rejects undersized inputs") {
    const SimCohort sim = simulate(2, 0.1, 606);
    CHECK_THROWS_AS(static_cast<void>(fit_lmm(sim.series)), ValidationError);
}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/core/linalg.hpp"

namespace cipred::labeling {

using cohort::Center;
using cohort::CohortDataset;
using cohort::Label;
using cohort::LongitudinalSeries;

// Random intercept + random slope model with an intercept-only fixed part:
//   y_i = 1 * beta0 + Z_i b_i + eps_i,  Z_i = [1, t_i],
//   b_i ~ N(0, Psi),  eps ~ N(0, sigma2 * I).
// Variance parameters maximize the restricted log-likelihood with beta0
// profiled out.
struct LmmFit {
    double beta0 = 0.0;
    double sigma2 = 0.0;
    linalg::Mat psi;  // 2x2, symmetric PSD
    std::vector<std::string> subject_ids;
    std::vector<std::pair<double, double>> blups;  // (b_int, b_slope) per subject
    double loglik = 0.0;  // restricted log-likelihood at the optimum
    bool converged = false;
    bool boundary = false;  // a variance component pinned at its floor
    int iterations = 0;
};

struct FitOptions {
    bool diag_psi = false;  // constrain Psi to be diagonal
    int max_iters = 500;
    double tol = 1e-8;  // successive restricted log-likelihood tolerance
};

LmmFit fit_lmm(const std::vector<LongitudinalSeries>& series,
               const FitOptions& opts = {});

// Restricted log-likelihood of (psi, sigma2) with beta0 profiled out.
double restricted_loglik(const std::vector<LongitudinalSeries>& series,
                         const linalg::Mat& psi, double sigma2);

// Profiled GLS fixed intercept for fixed variance parameters.
double profiled_beta0(const std::vector<LongitudinalSeries>& series,
                      const linalg::Mat& psi, double sigma2);

// BLUPs at fixed (beta0, psi, sigma2): b_i = Psi Z_i' V_i^-1 (y_i - 1*beta0).
std::vector<std::pair<double, double>> blups_given_theta(
    const std::vector<LongitudinalSeries>& series, double beta0,
    const linalg::Mat& psi, double sigma2);

// Random slope per subject (the fixed part is intercept-only, so the subject
// slope is just b_slope).
std::map<std::string, double> blup_slopes(const LmmFit& fit);

// Median split within one group: slope > median -> high, otherwise low
// (slopes equal to the median go to low).
std::map<std::string, Label> median_split(const std::map<std::string, double>& slopes);

// Same, splitting within each group key.
std::map<std::string, Label> median_split_by_group(
    const std::map<std::string, double>& slopes,
    const std::map<std::string, int>& group_of);

struct CohortLabels {
    std::map<Center, LmmFit> fits;
    std::map<std::string, double> slopes;
    std::map<std::string, Label> labels;
};

// One mixed model per center, then a per-center median split; writes labels
// into the cohort.
CohortLabels label_cohort(CohortDataset& cohort, const FitOptions& opts = {});

}  // namespace cipred::labeling

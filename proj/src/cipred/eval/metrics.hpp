#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cipred/core/errors.hpp"

namespace cipred::eval {

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;

    long total() const { return tp + tn + fp + fn; }
};

enum class MetricKind { acc, sensitivity, specificity, auc };
std::string metric_name(MetricKind m);

// Predicted positive iff score >= threshold.
ConfusionCounts confusion(const std::vector<double>& scores,
                          const std::vector<int>& labels, double threshold);

// Mann-Whitney AUC with tie credit 0.5: (#{s_i > s_j} + 0.5 #ties) / (n1 n0)
// over positive i, negative j. Throws when a class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsReport {
    std::string level = "slice";  // or "subject"
    long n = 0;
    double threshold = 0.5;
    ConfusionCounts counts;
    double acc = 0.0, sens = 0.0, spec = 0.0, auc = 0.0;
    bool sens_defined = true, spec_defined = true, auc_defined = true;
    double acc_ci[2] = {0, 0}, sens_ci[2] = {0, 0}, spec_ci[2] = {0, 0},
           auc_ci[2] = {0, 0};
    bool has_ci = false;
    bool ci_unstable = false;
};

// Point estimates only (no CIs). Degenerate single-class inputs flag the
// undefined metric rather than reporting 0/0.
MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels, double threshold = 0.5,
                              const std::string& level = "slice");

struct BootstrapCi {
    double lower = 0.0, upper = 0.0;
    bool unstable = false;  // metric undefined on more than 10% of resamples
};

// Percentile bootstrap resampling whole subjects (slice rows travel with
// their subject). groups[i] identifies row i's subject.
BootstrapCi bootstrap_ci(const std::vector<double>& scores,
                         const std::vector<int>& labels,
                         const std::vector<int>& groups, MetricKind metric,
                         int B = 1000, std::uint64_t seed = 1,
                         double threshold = 0.5);

// Fills all four CIs of a report.
void add_bootstrap_cis(MetricsReport& report, const std::vector<double>& scores,
                       const std::vector<int>& labels, const std::vector<int>& groups,
                       int B, std::uint64_t seed);

// Mean slice probability per subject; outputs sorted by group id.
void aggregate_to_subject(const std::vector<double>& slice_scores,
                          const std::vector<int>& labels,
                          const std::vector<int>& groups,
                          std::vector<double>& subject_scores,
                          std::vector<int>& subject_labels,
                          std::vector<int>& subject_ids);

}  // namespace cipred::eval

#include "cipred/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cipred/core/rng.hpp"

namespace cipred::eval {

std::string metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::acc: return "acc";
        case MetricKind::sensitivity: return "sensitivity";
        case MetricKind::specificity: return "specificity";
        case MetricKind::auc: return "auc";
    }
    return "?";
}

ConfusionCounts confusion(const std::vector<double>& scores,
                          const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size())
        throw ValidationError("scores and labels length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1)
            pred ? ++c.tp : ++c.fn;
        else
            pred ? ++c.fp : ++c.tn;
    }
    return c;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("scores and labels length mismatch");
    long n1 = 0, n0 = 0;
    for (int l : labels) (l == 1 ? n1 : n0) += 1;
    if (n1 == 0 || n0 == 0)
        throw ValidationError("AUC undefined with a single class");

    // Tie-aware rank scan; every increment is a multiple of 0.5, so the sum
    // is exact and matches brute-force pair counting bit for bit.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    double pairs = 0.0;
    double neg_seen = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double pos_block = 0.0, neg_block = 0.0;
        for (std::size_t k = i; k < j; ++k)
            (labels[order[k]] == 1 ? pos_block : neg_block) += 1.0;
        pairs += pos_block * neg_seen + 0.5 * pos_block * neg_block;
        neg_seen += neg_block;
        i = j;
    }
    return pairs / (static_cast<double>(n1) * static_cast<double>(n0));
}

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels, double threshold,
                              const std::string& level) {
    if (scores.empty()) throw ValidationError("cannot compute metrics on empty input");
    MetricsReport r;
    r.level = level;
    r.n = static_cast<long>(scores.size());
    r.threshold = threshold;
    r.counts = confusion(scores, labels, threshold);
    r.acc = static_cast<double>(r.counts.tp + r.counts.tn) / r.counts.total();
    if (r.counts.tp + r.counts.fn > 0) {
        r.sens = static_cast<double>(r.counts.tp) / (r.counts.tp + r.counts.fn);
    } else {
        r.sens_defined = false;
    }
    if (r.counts.tn + r.counts.fp > 0) {
        r.spec = static_cast<double>(r.counts.tn) / (r.counts.fp + r.counts.tn);
    } else {
        r.spec_defined = false;
    }
    if (!r.sens_defined || !r.spec_defined) {
        r.auc_defined = false;
    } else {
        r.auc = auc(scores, labels);
    }
    return r;
}

namespace {

struct GroupIndex {
    std::vector<int> ids;                    // distinct group ids
    std::vector<std::vector<int>> rows_of;   // rows per group
};

GroupIndex build_groups(const std::vector<int>& groups) {
    GroupIndex g;
    std::map<int, int> pos;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto [it, inserted] = pos.try_emplace(groups[i], static_cast<int>(g.ids.size()));
        if (inserted) {
            g.ids.push_back(groups[i]);
            g.rows_of.emplace_back();
        }
        g.rows_of[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
    }
    return g;
}

// Returns false when the metric is undefined on this resample.
bool metric_value(MetricKind metric, const std::vector<double>& s,
                  const std::vector<int>& y, double threshold, double& out) {
    long n1 = 0;
    for (int l : y) n1 += l;
    const long n0 = static_cast<long>(y.size()) - n1;
    switch (metric) {
        case MetricKind::acc: {
            const ConfusionCounts c = confusion(s, y, threshold);
            out = static_cast<double>(c.tp + c.tn) / c.total();
            return true;
        }
        case MetricKind::sensitivity: {
            if (n1 == 0) return false;
            const ConfusionCounts c = confusion(s, y, threshold);
            out = static_cast<double>(c.tp) / (c.tp + c.fn);
            return true;
        }
        case MetricKind::specificity: {
            if (n0 == 0) return false;
            const ConfusionCounts c = confusion(s, y, threshold);
            out = static_cast<double>(c.tn) / (c.fp + c.tn);
            return true;
        }
        case MetricKind::auc: {
            if (n1 == 0 || n0 == 0) return false;
            out = auc(s, y);
            return true;
        }
    }
    return false;
}

}  // namespace

BootstrapCi bootstrap_ci(const std::vector<double>& scores,
                         const std::vector<int>& labels,
                         const std::vector<int>& groups, MetricKind metric, int B,
                         std::uint64_t seed, double threshold) {
    if (scores.size() != labels.size() || scores.size() != groups.size())
        throw ValidationError("bootstrap inputs length mismatch");
    if (scores.size() < 10)
        throw ValidationError("bootstrap needs at least 10 samples");
    const GroupIndex gi = build_groups(groups);
    const std::size_t n_groups = gi.ids.size();

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(B));
    int undefined = 0;
    for (int b = 0; b < B; ++b) {
        Rng rng(derive_seed(seed, 0xb007, static_cast<std::uint64_t>(b)));
        bool ok = false;
        double value = 0.0;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            std::vector<double> s;
            std::vector<int> y;
            for (std::size_t d = 0; d < n_groups; ++d) {
                const auto& rows =
                    gi.rows_of[static_cast<std::size_t>(rng.uniform_u64(n_groups))];
                for (int r : rows) {
                    s.push_back(scores[static_cast<std::size_t>(r)]);
                    y.push_back(labels[static_cast<std::size_t>(r)]);
                }
            }
            ok = metric_value(metric, s, y, threshold, value);
        }
        if (ok)
            values.push_back(value);
        else
            ++undefined;
    }

    BootstrapCi ci;
    ci.unstable = undefined > B / 10;
    if (values.empty()) {
        ci.unstable = true;
        return ci;
    }
    std::sort(values.begin(), values.end());
    const std::size_t last = values.size() - 1;
    const std::size_t lo = static_cast<std::size_t>(std::floor(0.025 * last));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(0.975 * last));
    ci.lower = values[lo];
    ci.upper = values[hi];
    return ci;
}

void add_bootstrap_cis(MetricsReport& report, const std::vector<double>& scores,
                       const std::vector<int>& labels, const std::vector<int>& groups,
                       int B, std::uint64_t seed) {
    const auto run = [&](MetricKind m, double out[2]) {
        const BootstrapCi ci = bootstrap_ci(scores, labels, groups, m, B, seed,
                                            report.threshold);
        out[0] = ci.lower;
        out[1] = ci.upper;
        report.ci_unstable = report.ci_unstable || ci.unstable;
    };
    run(MetricKind::acc, report.acc_ci);
    if (report.sens_defined) run(MetricKind::sensitivity, report.sens_ci);
    if (report.spec_defined) run(MetricKind::specificity, report.spec_ci);
    if (report.auc_defined) run(MetricKind::auc, report.auc_ci);
    report.has_ci = true;
}

void aggregate_to_subject(const std::vector<double>& slice_scores,
                          const std::vector<int>& labels,
                          const std::vector<int>& groups,
                          std::vector<double>& subject_scores,
                          std::vector<int>& subject_labels,
                          std::vector<int>& subject_ids) {
    if (slice_scores.empty()) return;
    std::map<int, std::pair<double, long>> acc;
    std::map<int, int> lab;
    for (std::size_t i = 0; i < slice_scores.size(); ++i) {
        auto& a = acc[groups[i]];
        a.first += slice_scores[i];
        a.second += 1;
        lab[groups[i]] = labels[i];
    }
    subject_scores.clear();
    subject_labels.clear();
    subject_ids.clear();
    for (const auto& [g, a] : acc) {
        subject_ids.push_back(g);
        subject_scores.push_back(a.first / a.second);
        subject_labels.push_back(lab[g]);
    }
}

}  // namespace cipred::eval

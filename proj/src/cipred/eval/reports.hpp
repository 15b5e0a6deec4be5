#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/core/linalg.hpp"
#include "cipred/eval/metrics.hpp"
#include "cipred/preproc/preproc.hpp"

namespace cipred::eval {

using cohort::Center;
using cohort::Language;

// Evaluation rows share a key set: one entry per scored slice.
struct EvalKeys {
    std::vector<int> subject;  // cohort index
    std::vector<int> label;    // 0/1
    std::vector<Center> center;
    std::vector<Language> language;
};

struct ScoredModel {
    std::string name;      // e.g. "fused", "neural_only", "clinical_only"
    std::string modality;  // e.g. "clinical+neural", "neural", "clinical"
    std::vector<double> slice_scores;
    double threshold = 0.5;
};

// Subset selector over (center, language); the canonical forms are
// "all", "center=A", "language=english", "center=A,language=english".
struct Subset {
    std::string name;
    std::optional<Center> center;
    std::optional<Language> language;

    static Subset parse(const std::string& spec);
    bool contains(Center c, Language l) const;
};

struct ComparisonRow {
    std::string subset;
    std::string model;
    std::string modality;
    MetricsReport slice_report;
    MetricsReport subject_report;
};

// Metrics with bootstrap CIs per (subset x model), slice level plus the
// subject-mean extension. Models must share the key set.
std::vector<ComparisonRow> compare_models(const EvalKeys& keys,
                                          const std::vector<ScoredModel>& models,
                                          const std::vector<Subset>& subsets,
                                          int bootstrap_B, std::uint64_t seed);

void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::string& path);

// Pearson correlations among the clinical variables and the fitted slope,
// one matrix per center. Zero-variance pairs are NaN and flagged.
struct CorrelationMatrix {
    std::vector<std::string> variables;
    linalg::Mat r;
    std::vector<std::pair<int, int>> undefined_pairs;
};

CorrelationMatrix correlation_matrix(
    const std::vector<const cohort::ClinicalRecord*>& records,
    const std::map<std::string, double>& slopes);

void write_correlation_csv(const CorrelationMatrix& m, const std::string& path);

// Slice-window sensitivity sweep. The trainer callback owns the expensive
// work: it trains with the given window and returns the held-out slice AUC.
struct SensitivityRow {
    std::string window;
    int count = 0;
    double auc = 0.0;
};

std::vector<SensitivityRow> sensitivity_analysis(
    const std::vector<preproc::WindowPosition>& windows, const std::vector<int>& counts,
    const std::function<double(const preproc::SliceWindow&)>& train_and_score);

void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                           const std::string& path);

}  // namespace cipred::eval

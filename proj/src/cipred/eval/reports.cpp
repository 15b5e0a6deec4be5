#include "cipred/eval/reports.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cipred/core/csv.hpp"

namespace cipred::eval {

Subset Subset::parse(const std::string& spec) {
    Subset s;
    s.name = spec;
    if (spec == "all") return s;
    std::istringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw ValidationError("bad subset spec '" + spec + "'");
        const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
        if (key == "center")
            s.center = cohort::center_from_name(value);
        else if (key == "language")
            s.language = cohort::language_from_name(value);
        else
            throw ValidationError("unknown subset key '" + key + "'");
    }
    return s;
}

bool Subset::contains(Center c, Language l) const {
    if (center && *center != c) return false;
    if (language && *language != l) return false;
    return true;
}

std::vector<ComparisonRow> compare_models(const EvalKeys& keys,
                                          const std::vector<ScoredModel>& models,
                                          const std::vector<Subset>& subsets,
                                          int bootstrap_B, std::uint64_t seed) {
    const std::size_t n = keys.subject.size();
    for (const auto& m : models)
        if (m.slice_scores.size() != n)
            throw ValidationError("model '" + m.name + "' scores do not match key set");

    std::vector<ComparisonRow> rows;
    for (const auto& subset : subsets) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (subset.contains(keys.center[i], keys.language[i]))
                idx.push_back(static_cast<int>(i));
        if (idx.empty()) continue;
        for (const auto& model : models) {
            std::vector<double> s;
            std::vector<int> y, g;
            s.reserve(idx.size());
            for (int i : idx) {
                s.push_back(model.slice_scores[static_cast<std::size_t>(i)]);
                y.push_back(keys.label[static_cast<std::size_t>(i)]);
                g.push_back(keys.subject[static_cast<std::size_t>(i)]);
            }
            ComparisonRow row;
            row.subset = subset.name;
            row.model = model.name;
            row.modality = model.modality;
            row.slice_report = compute_metrics(s, y, model.threshold, "slice");
            if (s.size() >= 10)
                add_bootstrap_cis(row.slice_report, s, y, g, bootstrap_B,
                                  derive_seed(seed, 0xc1, rows.size()));

            std::vector<double> ss;
            std::vector<int> sy, sid;
            aggregate_to_subject(s, y, g, ss, sy, sid);
            row.subject_report = compute_metrics(ss, sy, model.threshold, "subject");
            if (ss.size() >= 10)
                add_bootstrap_cis(row.subject_report, ss, sy, sid, bootstrap_B,
                                  derive_seed(seed, 0xc2, rows.size()));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

std::string fmt(double v) { return csv::format_double(v); }

void append_report_fields(std::vector<std::string>& row, const MetricsReport& r) {
    row.push_back(std::to_string(r.n));
    row.push_back(fmt(r.acc));
    row.push_back(fmt(r.acc_ci[0]));
    row.push_back(fmt(r.acc_ci[1]));
    row.push_back(r.sens_defined ? fmt(r.sens) : "undefined");
    row.push_back(r.sens_defined ? fmt(r.sens_ci[0]) : "");
    row.push_back(r.sens_defined ? fmt(r.sens_ci[1]) : "");
    row.push_back(r.spec_defined ? fmt(r.spec) : "undefined");
    row.push_back(r.spec_defined ? fmt(r.spec_ci[0]) : "");
    row.push_back(r.spec_defined ? fmt(r.spec_ci[1]) : "");
    row.push_back(r.auc_defined ? fmt(r.auc) : "undefined");
    row.push_back(r.auc_defined ? fmt(r.auc_ci[0]) : "");
    row.push_back(r.auc_defined ? fmt(r.auc_ci[1]) : "");
}

}  // namespace

void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::string& path) {
    csv::Table t;
    t.header = {"subset", "model",    "modality", "level",    "n",
                "acc",    "acc_lo",   "acc_hi",   "sens",     "sens_lo",
                "sens_hi", "spec",    "spec_lo",  "spec_hi",  "auc",
                "auc_lo", "auc_hi"};
    for (const auto& r : rows) {
        for (const auto* rep : {&r.slice_report, &r.subject_report}) {
            std::vector<std::string> row = {r.subset, r.model, r.modality, rep->level};
            append_report_fields(row, *rep);
            t.rows.push_back(std::move(row));
        }
    }
    csv::write_file(path, t);
}

CorrelationMatrix correlation_matrix(
    const std::vector<const cohort::ClinicalRecord*>& records,
    const std::map<std::string, double>& slopes) {
    if (records.size() < 3)
        throw ValidationError("correlation matrix needs at least 3 subjects");
    CorrelationMatrix out;
    out.variables = {"sex",      "age_at_ci", "age_at_mri", "age_at_ha",
                     "pta_left", "pta_right", "preop_score", "slope"};
    const int nv = static_cast<int>(out.variables.size());
    const int n = static_cast<int>(records.size());

    std::vector<std::vector<double>> cols(static_cast<std::size_t>(nv),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        const auto f = records[static_cast<std::size_t>(i)]->features();
        for (int v = 0; v < 7; ++v) cols[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)] = f[static_cast<std::size_t>(v)];
        const auto it = slopes.find(records[static_cast<std::size_t>(i)]->subject_id);
        if (it == slopes.end())
            throw ValidationError("no fitted slope for subject " +
                                  records[static_cast<std::size_t>(i)]->subject_id);
        cols[7][static_cast<std::size_t>(i)] = it->second;
    }

    std::vector<double> mean(static_cast<std::size_t>(nv), 0.0),
        sd(static_cast<std::size_t>(nv), 0.0);
    for (int v = 0; v < nv; ++v) {
        for (double x : cols[static_cast<std::size_t>(v)]) mean[static_cast<std::size_t>(v)] += x;
        mean[static_cast<std::size_t>(v)] /= n;
        for (double x : cols[static_cast<std::size_t>(v)])
            sd[static_cast<std::size_t>(v)] +=
                (x - mean[static_cast<std::size_t>(v)]) * (x - mean[static_cast<std::size_t>(v)]);
        sd[static_cast<std::size_t>(v)] = std::sqrt(sd[static_cast<std::size_t>(v)]);
    }

    out.r = linalg::Mat(static_cast<std::size_t>(nv), static_cast<std::size_t>(nv));
    for (int a = 0; a < nv; ++a) {
        for (int b = 0; b < nv; ++b) {
            if (a == b) {
                out.r(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = 1.0;
                continue;
            }
            if (sd[static_cast<std::size_t>(a)] < 1e-30 || sd[static_cast<std::size_t>(b)] < 1e-30) {
                out.r(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) =
                    std::numeric_limits<double>::quiet_NaN();
                if (a < b) out.undefined_pairs.emplace_back(a, b);
                continue;
            }
            double cov = 0.0;
            for (int i = 0; i < n; ++i)
                cov += (cols[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(a)]) *
                       (cols[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(b)]);
            out.r(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) =
                cov / (sd[static_cast<std::size_t>(a)] * sd[static_cast<std::size_t>(b)]);
        }
    }
    return out;
}

void write_correlation_csv(const CorrelationMatrix& m, const std::string& path) {
    csv::Table t;
    t.header = {"variable"};
    for (const auto& v : m.variables) t.header.push_back(v);
    for (std::size_t a = 0; a < m.variables.size(); ++a) {
        std::vector<std::string> row = {m.variables[a]};
        for (std::size_t b = 0; b < m.variables.size(); ++b) {
            const double r = m.r(a, b);
            row.push_back(std::isnan(r) ? "undefined" : csv::format_double(r));
        }
        t.rows.push_back(std::move(row));
    }
    csv::write_file(path, t);
}

std::vector<SensitivityRow> sensitivity_analysis(
    const std::vector<preproc::WindowPosition>& windows, const std::vector<int>& counts,
    const std::function<double(const preproc::SliceWindow&)>& train_and_score) {
    std::vector<SensitivityRow> rows;
    for (const auto pos : windows) {
        for (const int count : counts) {
            preproc::SliceWindow w;
            w.position = pos;
            w.count = count;
            SensitivityRow row;
            row.window = w.describe();
            row.count = count;
            row.auc = train_and_score(w);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                           const std::string& path) {
    csv::Table t;
    t.header = {"window", "count", "auc"};
    for (const auto& r : rows)
        t.rows.push_back({r.window, std::to_string(r.count), csv::format_double(r.auc)});
    csv::write_file(path, t);
}

}  // namespace cipred::eval

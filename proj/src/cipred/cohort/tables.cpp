#include "cipred/cohort/tables.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "cipred/cohort/volume_io.hpp"
#include "cipred/core/csv.hpp"

namespace cipred::cohort {

namespace {

int require_column(const csv::Table& t, const std::string& name,
                   const std::string& path) {
    const int idx = t.column(name);
    if (idx < 0) throw FormatError("missing column '" + name + "' in " + path);
    return idx;
}

}  // namespace

std::vector<ClinicalRecord> read_clinical_table(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_id = require_column(t, "subject_id", path);
    const int c_center = require_column(t, "center", path);
    const int c_lang = require_column(t, "language", path);
    const int c_sex = require_column(t, "sex", path);
    const int c_aci = require_column(t, "age_at_ci", path);
    const int c_amri = require_column(t, "age_at_mri", path);
    const int c_aha = require_column(t, "age_at_ha", path);
    const int c_pl = require_column(t, "pta_left", path);
    const int c_pr = require_column(t, "pta_right", path);
    const int c_pre = require_column(t, "preop_score", path);

    std::vector<ClinicalRecord> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size())
            throw FormatError("row " + std::to_string(r + 2) + " has " +
                              std::to_string(row.size()) + " fields in " + path);
        ClinicalRecord rec;
        rec.subject_id = row[c_id];
        const std::string ctx = path + " (subject " + rec.subject_id + ")";
        rec.center = center_from_name(row[c_center]);
        rec.language = language_from_name(row[c_lang]);
        rec.sex = static_cast<int>(csv::parse_int(row[c_sex], ctx));
        rec.age_at_ci = csv::parse_double(row[c_aci], ctx);
        rec.age_at_mri = csv::parse_double(row[c_amri], ctx);
        rec.age_at_ha = csv::parse_double(row[c_aha], ctx);
        rec.pta_left = csv::parse_double(row[c_pl], ctx);
        rec.pta_right = csv::parse_double(row[c_pr], ctx);
        rec.preop_score = csv::parse_double(row[c_pre], ctx);
        rec.validate();
        if (!seen.insert(rec.subject_id).second)
            throw ValidationError("duplicate subject_id '" + rec.subject_id + "' in " +
                                  path);
        out.push_back(std::move(rec));
    }
    return out;
}

void write_clinical_table(const std::vector<ClinicalRecord>& records,
                          const std::string& path) {
    csv::Table t;
    t.header = {"subject_id", "center",     "language",  "sex",      "age_at_ci",
                "age_at_mri", "age_at_ha",  "pta_left",  "pta_right", "preop_score"};
    for (const auto& r : records) {
        t.rows.push_back({r.subject_id, center_name(r.center), language_name(r.language),
                          std::to_string(r.sex), csv::format_double(r.age_at_ci),
                          csv::format_double(r.age_at_mri), csv::format_double(r.age_at_ha),
                          csv::format_double(r.pta_left), csv::format_double(r.pta_right),
                          csv::format_double(r.preop_score)});
    }
    csv::write_file(path, t);
}

std::vector<LongitudinalSeries> read_scores_table(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_id = require_column(t, "subject_id", path);
    const int c_time = require_column(t, "time_months", path);
    const int c_score = require_column(t, "score", path);

    std::vector<std::string> order;
    std::map<std::string, std::vector<Observation>> grouped;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw FormatError("ragged row in " + path);
        const std::string& id = row[c_id];
        const std::string ctx = path + " (subject " + id + ")";
        Observation obs;
        obs.time_months = csv::parse_double(row[c_time], ctx);
        obs.score = csv::parse_double(row[c_score], ctx);
        auto it = grouped.find(id);
        if (it == grouped.end()) {
            order.push_back(id);
            grouped[id] = {obs};
        } else {
            it->second.push_back(obs);
        }
    }

    std::vector<LongitudinalSeries> out;
    for (const auto& id : order) {
        LongitudinalSeries s;
        s.subject_id = id;
        s.observations = grouped[id];
        std::sort(s.observations.begin(), s.observations.end(),
                  [](const Observation& a, const Observation& b) {
                      return a.time_months < b.time_months;
                  });
        s.validate();  // enforces >= 2 observations and strict monotonicity
        out.push_back(std::move(s));
    }
    return out;
}

void write_scores_table(const std::vector<LongitudinalSeries>& series,
                        const std::string& path) {
    csv::Table t;
    t.header = {"subject_id", "time_months", "score"};
    for (const auto& s : series)
        for (const auto& obs : s.observations)
            t.rows.push_back({s.subject_id, csv::format_double(obs.time_months),
                              csv::format_double(obs.score)});
    csv::write_file(path, t);
}

CohortDataset assemble_cohort(const std::vector<ClinicalRecord>& records,
                              const std::vector<LongitudinalSeries>& series,
                              const std::string& volume_dir,
                              AssembleReport* report) {
    AssembleReport local;
    AssembleReport& rep = report ? *report : local;

    std::map<std::string, const LongitudinalSeries*> by_id;
    for (const auto& s : series) by_id[s.subject_id] = &s;

    std::set<std::string> record_ids;
    CohortDataset cohort;
    for (const auto& rec : records) {
        record_ids.insert(rec.subject_id);
        const auto it = by_id.find(rec.subject_id);
        if (it == by_id.end()) {
            rep.missing_series.push_back(rec.subject_id);
            continue;
        }
        const std::string vol_path =
            (std::filesystem::path(volume_dir) / (rec.subject_id + ".rvol")).string();
        if (!std::filesystem::exists(vol_path)) {
            rep.missing_volume.push_back(rec.subject_id);
            continue;
        }
        Subject subj;
        subj.record = rec;
        subj.series = *it->second;
        subj.volume = read_volume(vol_path);
        cohort.subjects.push_back(std::move(subj));
    }
    for (const auto& s : series)
        if (!record_ids.count(s.subject_id)) rep.missing_record.push_back(s.subject_id);

    if (cohort.subjects.empty())
        throw ValidationError("cohort assembly produced an empty join");
    return cohort;
}

}  // namespace cipred::cohort

#pragma once

#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"

namespace cipred::cohort {

// Clinical CSV header:
// subject_id,center,language,sex,age_at_ci,age_at_mri,age_at_ha,pta_left,pta_right,preop_score
std::vector<ClinicalRecord> read_clinical_table(const std::string& path);
void write_clinical_table(const std::vector<ClinicalRecord>& records,
                          const std::string& path);

// Scores CSV header: subject_id,time_months,score. Rows are grouped by
// subject (keeping first-appearance order), times sorted ascending.
std::vector<LongitudinalSeries> read_scores_table(const std::string& path);
void write_scores_table(const std::vector<LongitudinalSeries>& series,
                        const std::string& path);

struct AssembleReport {
    std::vector<std::string> missing_volume;
    std::vector<std::string> missing_series;
    std::vector<std::string> missing_record;

    std::size_t excluded() const {
        return missing_volume.size() + missing_series.size() + missing_record.size();
    }
};

// Inner join of the three sources on subject_id. Volumes are looked up as
// <volume_dir>/<subject_id>.rvol. Subjects missing any element are excluded
// and reported; an empty join is fatal.
CohortDataset assemble_cohort(const std::vector<ClinicalRecord>& records,
                              const std::vector<LongitudinalSeries>& series,
                              const std::string& volume_dir,
                              AssembleReport* report = nullptr);

}  // namespace cipred::cohort

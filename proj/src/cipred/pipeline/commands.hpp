#pragma once

#include <string>
#include <vector>

#include "cipred/eval/splits.hpp"
#include "cipred/pipeline/config.hpp"

namespace cipred::pipeline {

// Command bodies behind the CLI. Each reads its inputs from cfg.paths, writes
// only under the output directory (cmd_generate: the cohort directory), and
// is deterministic for a fixed config+seed apart from the manifest timestamp.

void cmd_generate(const PipelineConfig& cfg);
void cmd_label(const PipelineConfig& cfg);
void cmd_preprocess(const PipelineConfig& cfg);
void cmd_pretrain(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_baselines(const PipelineConfig& cfg);
void cmd_evaluate(const PipelineConfig& cfg);
void cmd_sensitivity(const PipelineConfig& cfg);
void cmd_report(const PipelineConfig& cfg);

// Shared plumbing (used by commands, integration tests and the acceptance
// harness).
cohort::CohortDataset load_cohort(const PipelineConfig& cfg);
void apply_labels_file(cohort::CohortDataset& cohort, const std::string& labels_csv);
std::vector<preproc::SliceSample> preprocess_cohort(const cohort::CohortDataset& cohort,
                                                    const preproc::SliceWindow& window,
                                                    double target_mm);
std::vector<preproc::SliceSample> slices_of_subjects(
    const std::vector<preproc::SliceSample>& all, const std::vector<int>& subjects);

void write_splits_json(const eval::SplitPlan& plan, const cohort::CohortDataset& cohort,
                       const std::string& path);
eval::SplitPlan read_splits_json(const std::string& path,
                                 const cohort::CohortDataset& cohort);

// report.json structural check (key presence and types).
void validate_report_json(const nlohmann::json& report);

}  // namespace cipred::pipeline

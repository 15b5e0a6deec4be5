#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cipred/baselines/reducers.hpp"
#include "cipred/labeling/lmm.hpp"
#include "cipred/nnet/train.hpp"
#include "cipred/synth/synthgen.hpp"

namespace cipred::pipeline {

// One canonical JSON document drives every command; unknown keys are
// rejected so typos fail loudly. CLI flags override keys via dotted paths.
struct PipelineConfig {
    std::string version = "1";
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = hardware default

    struct Paths {
        std::string cohort_dir = "cohort";
        std::string out_dir = "out";
        std::string cache_dir;
    } paths;

    std::optional<synth::SynthSpec> synth;

    labeling::FitOptions labeling;

    preproc::SliceWindow window;  // default central:15
    double target_mm = 1.0;

    nnet::ArchConfig arch;
    nnet::SourceTaskSpec pretrain_task;
    nnet::TrainConfig pretrain;  // defaults tuned for the source task
    nnet::TrainConfig train;

    struct Baselines {
        std::vector<std::string> reducers = {"pca", "grp", "rfe", "ufs"};
        int k = 140;
        std::vector<std::string> models = {"lasso",      "ridge",   "elastic_net",
                                           "svm_linear", "dtree",   "rforest",
                                           "knn",        "gbt"};
        int n_draws = 8;
        int inner_folds = 5;
        baselines::ReducerOptions reducer_opts;
    } baselines_cfg;

    struct Eval {
        int bootstrap_B = 1000;
        std::vector<std::string> subsets = {"all"};
        double threshold = 0.5;
        std::string neural_only_mode = "ablate";  // or "retrain"
        bool plots = true;
    } eval_cfg;

    struct Sensitivity {
        std::vector<std::string> windows = {"superior", "central", "inferior"};
        std::vector<int> counts = {15};
    } sensitivity_cfg;

    void validate() const;
};

PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config_file(const std::string& path);

// Dotted-path override, e.g. "train.batch_size=16". Values parse as JSON
// when possible, else as strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

preproc::SliceWindow window_from_config(const nlohmann::json& j);

}  // namespace cipred::pipeline

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cipred/cohort/types.hpp"
#include "cipred/nnet/adam.hpp"
#include "cipred/nnet/model.hpp"
#include "cipred/preproc/preproc.hpp"

namespace cipred::nnet {

using cohort::Center;
using cohort::ClinicalRecord;
using cohort::CohortDataset;

// Per-center standardization of the 7 clinical features, fitted on the
// training split only. Unseen centers fall back to the pooled statistics.
struct Standardizer {
    struct Stats {
        std::array<double, 7> mean{}, sd{};
    };
    std::map<Center, Stats> per_center;
    Stats pooled;
    bool fitted = false;

    void fit(const std::vector<const ClinicalRecord*>& train_records);
    std::array<float, 7> transform(const ClinicalRecord& r,
                                   bool* used_pooled = nullptr) const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;  // pretraining only
    int best_epoch = -1;               // index into the loss vectors
};

// Everything predictions depend on besides the weights; two artifacts are
// comparable only when their fingerprints match.
struct PreprocFingerprint {
    std::string window;  // SliceWindow::describe()
    double target_mm = 1.0;
    int image_size = preproc::kTargetSize;
    ArchConfig arch;

    std::string canonical() const;
    bool operator==(const PreprocFingerprint& other) const {
        return canonical() == other.canonical();
    }
};

struct ModelArtifact {
    ArchConfig arch;
    ParamSet params;  // backbone.* (frozen) + fusion.*
    TrainConfig config;
    Standardizer standardizer;
    preproc::SliceWindow window;
    double target_mm = 1.0;
    TrainHistory history;
    std::string split_fingerprint;

    PreprocFingerprint fingerprint() const;
};

// ------------------------------------------------------------- pretraining

// Synthetic source task: classify smooth bump layouts (images generated the
// same way the cohort volumes get their patterns). The trained backbone is
// kept; the source head is discarded.
struct SourceTaskSpec {
    int n_classes = 4;
    int n_train = 1200;
    int n_val = 300;
    int image_size = 96;  // divisible by 16
    double noise_sd = 0.35;
    double target_accuracy = 0.9;
    std::uint64_t seed = 1;
};

struct PretrainResult {
    ParamSet backbone;
    TrainHistory history;
    double val_accuracy = 0.0;  // at the best-validation epoch
    bool reached_target = false;
};

PretrainResult pretrain_backbone(const ArchConfig& arch, const SourceTaskSpec& task,
                                 const TrainConfig& cfg);

// --------------------------------------------------------------- fine-tune

// Trains the clinical encoder + attention + head on slice samples with the
// backbone frozen. Augmentation is applied to training samples only; early
// stopping watches the slice-level validation loss with the configured
// patience; the best-validation parameters are returned.
//
// fixed_epochs > 0 switches to a fixed-length run without early stopping
// (used for the final model on the full train+val pool); val_slices may then
// be empty and the final-epoch parameters are returned. zero_clinical trains
// the image-only ablation (standardized clinical vector pinned to zero).
ModelArtifact finetune(const ArchConfig& arch, const ParamSet& backbone,
                       const CohortDataset& cohort,
                       const std::vector<preproc::SliceSample>& train_slices,
                       const std::vector<preproc::SliceSample>& val_slices,
                       const preproc::SliceWindow& window, double target_mm,
                       const TrainConfig& cfg, const std::string& split_fingerprint,
                       int fixed_epochs = 0, bool zero_clinical = false);

// --------------------------------------------------------------- inference

struct Prediction {
    std::vector<double> slice_probs;
    std::vector<int> slice_z;
    double subject_prob = 0.0;
    bool used_pooled_standardizer = false;
};

// zero_clinical replaces the standardized clinical vector with zeros (the
// image-only ablation switch).
Prediction predict(const ModelArtifact& artifact, const cohort::Volume& volume,
                   const ClinicalRecord& record, bool zero_clinical = false);

// Same on precomputed slices; window_descr must match the artifact
// fingerprint or the call refuses.
Prediction predict_slices(const ModelArtifact& artifact,
                          const std::vector<preproc::SliceSample>& slices,
                          const ClinicalRecord& record, const std::string& window_descr,
                          bool zero_clinical = false);

// Mean slice-level BCE of the artifact on a labeled slice set (model
// selection / reporting).
double mean_bce(const ModelArtifact& artifact, const CohortDataset& cohort,
                const std::vector<preproc::SliceSample>& slices);

}  // namespace cipred::nnet

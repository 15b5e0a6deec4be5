#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "cipred/eval/metrics.hpp"
#include "cipred/nnet/artifact.hpp"
#include "cipred/nnet/model.hpp"
#include "cipred/nnet/train.hpp"
#include "cipred/synth/synthgen.hpp"

using namespace cipred;
using namespace cipred::nnet;

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2]
                        : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

struct TinyCohort {
    cohort::CohortDataset cohort;
    std::vector<preproc::SliceSample> train, val, test;
    preproc::SliceWindow window;
};

TinyCohort strong_signal_cohort(std::uint64_t seed) {
    synth::SynthSpec spec = synth::SynthSpec::small_default(8, seed);
    spec.nx = spec.ny = 48;
    spec.nz = 32;
    spec.signal_region.count = 5;
    spec.kappa_img = 2.5;
    spec.kappa_clin = 0.2;
    spec.signal_jitter_vox = 2.0;
    auto [cohort_data, truth] = synth::generate_cohort(spec);
    synth::label_from_truth(cohort_data, truth);

    TinyCohort out;
    out.window.count = 5;
    for (std::size_t i = 0; i < cohort_data.subjects.size(); ++i) {
        auto slices = preproc::preprocess_volume(cohort_data.subjects[i].volume,
                                                 out.window, static_cast<int>(i));
        const int m = (static_cast<int>(i) / 2) % 4;
        auto& dst = m == 3 ? out.test : (m == 2 ? out.val : out.train);
        dst.insert(dst.end(), slices.begin(), slices.end());
    }
    out.cohort = std::move(cohort_data);
    return out;
}

}  // namespace

TEST_CASE("pretraining separates an easy two-class source task") {
    ArchConfig arch;
    SourceTaskSpec task;
    task.n_classes = 2;
    task.n_train = 160;
    task.n_val = 60;
    task.image_size = 48;
    task.noise_sd = 0.15;
    task.seed = 5;
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 12;
    cfg.early_stop_patience = 11;
    cfg.dropout_rate = 0.0;
    cfg.seed = 5;
    const PretrainResult res = pretrain_backbone(arch, task, cfg);
    CHECK(res.val_accuracy >= 0.95);
    CHECK(res.reached_target);

    // Loss decreases between epoch-median halves (smoothed trend).
    const auto& tl = res.history.train_loss;
    REQUIRE(tl.size() >= 4);
    const std::vector<double> first(tl.begin(), tl.begin() + tl.size() / 2);
    const std::vector<double> second(tl.begin() + tl.size() / 2, tl.end());
    CHECK(median_of(second) <= median_of(first));

    // Determinism: the same seed yields bit-identical backbone bytes.
    const PretrainResult res2 = pretrain_backbone(arch, task, cfg);
    CHECK(hash_params(res.backbone, "backbone.") ==
          hash_params(res2.backbone, "backbone."));
}

TEST_CASE("fine-tuning freezes the backbone and tracks the best epoch") {
    const TinyCohort tiny = strong_signal_cohort(11);
    ArchConfig arch;
    const ParamSet backbone = make_backbone_params(arch, 6);
    const std::string before = hash_params(backbone, "backbone.");

    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.early_stop_patience = 3;
    cfg.batch_size = 32;
    cfg.learning_rate = 2e-3;
    cfg.seed = 3;
    const ModelArtifact art = finetune(arch, backbone, tiny.cohort, tiny.train,
                                       tiny.val, tiny.window, 1.0, cfg, "fp-test");
    CHECK(hash_params(art.params, "backbone.") == before);

    REQUIRE(!art.history.val_loss.empty());
    int argmin = 0;
    for (std::size_t e = 0; e < art.history.val_loss.size(); ++e)
        if (art.history.val_loss[e] < art.history.val_loss[static_cast<std::size_t>(argmin)])
            argmin = static_cast<int>(e);
    CHECK(art.history.best_epoch == argmin);
    // Early stopping: no more than best_epoch + patience + 1 epochs ran.
    CHECK(static_cast<int>(art.history.val_loss.size()) <=
          art.history.best_epoch + cfg.early_stop_patience + 1);
    CHECK(art.split_fingerprint == "fp-test");

    // Error paths: empty split and single-class training labels.
    CHECK_THROWS_AS(static_cast<void>(finetune(arch, backbone, tiny.cohort, {}, tiny.val,
                                               tiny.window, 1.0, cfg, "")),
                    ValidationError);
    auto one_class = tiny.cohort;
    for (auto& s : one_class.subjects) s.label = cohort::Label::high;
    CHECK_THROWS_AS(static_cast<void>(finetune(arch, backbone, one_class, tiny.train,
                                               tiny.val, tiny.window, 1.0, cfg, "")),
                    ValidationError);
}

TEST_CASE("fine-tuned model learns a strong image signal") {
    const TinyCohort tiny = strong_signal_cohort(21);
    ArchConfig arch;
    SourceTaskSpec task;
    task.n_train = 240;
    task.n_val = 60;
    task.image_size = 48;
    task.seed = 9;
    TrainConfig pre_cfg;
    pre_cfg.learning_rate = 1e-3;
    pre_cfg.batch_size = 32;
    pre_cfg.max_epochs = 10;
    pre_cfg.early_stop_patience = 9;
    pre_cfg.dropout_rate = 0.0;
    pre_cfg.seed = 9;
    const PretrainResult pre = pretrain_backbone(arch, task, pre_cfg);

    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.early_stop_patience = 12;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.dropout_rate = 0.25;
    cfg.seed = 4;
    const ModelArtifact art = finetune(arch, pre.backbone, tiny.cohort, tiny.train,
                                       tiny.val, tiny.window, 1.0, cfg, "fp");

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < tiny.cohort.subjects.size(); ++i) {
        std::vector<preproc::SliceSample> mine;
        for (const auto& s : tiny.test)
            if (s.subject == static_cast<int>(i)) mine.push_back(s);
        if (mine.empty()) continue;
        const auto pred = predict_slices(art, mine, tiny.cohort.subjects[i].record,
                                         tiny.window.describe());
        for (double p : pred.slice_probs) {
            scores.push_back(p);
            labels.push_back(tiny.cohort.subjects[i].label == cohort::Label::high ? 1
                                                                                  : 0);
        }
        // Subject probability is the mean of slice probabilities.
        CHECK(pred.subject_prob >=
              *std::min_element(pred.slice_probs.begin(), pred.slice_probs.end()) - 1e-12);
        CHECK(pred.subject_prob <=
              *std::max_element(pred.slice_probs.begin(), pred.slice_probs.end()) + 1e-12);
    }
    CHECK(eval::auc(scores, labels) >= 0.8);
}

TEST_CASE("prediction is pure, repeatable and fingerprint-guarded") {
    const TinyCohort tiny = strong_signal_cohort(31);
    ArchConfig arch;
    ModelArtifact art;
    art.arch = arch;
    art.params = make_backbone_params(arch, 8);
    append_fusion_params(art.params, arch, 8);
    art.window = tiny.window;
    std::vector<const cohort::ClinicalRecord*> recs;
    for (const auto& s : tiny.cohort.subjects) recs.push_back(&s.record);
    art.standardizer.fit(recs);

    const auto& subj = tiny.cohort.subjects[0];
    namespace fs = std::filesystem;
    const fs::path f1 = fs::temp_directory_path() /
                        ("cipred_pure1_" + std::to_string(::getpid()) + ".cima");
    const fs::path f2 = fs::temp_directory_path() /
                        ("cipred_pure2_" + std::to_string(::getpid()) + ".cima");
    save_artifact(art, f1.string());
    const Prediction p1 = predict(art, subj.volume, subj.record);
    const Prediction p2 = predict(art, subj.volume, subj.record);
    CHECK(p1.slice_probs == p2.slice_probs);
    CHECK(p1.subject_prob == p2.subject_prob);
    save_artifact(art, f2.string());

    // Byte-identical artifact before and after prediction: no hidden state.
    std::ifstream in1(f1, std::ios::binary), in2(f2, std::ios::binary);
    std::ostringstream b1, b2;
    b1 << in1.rdbuf();
    b2 << in2.rdbuf();
    CHECK(b1.str() == b2.str());
    fs::remove(f1);
    fs::remove(f2);

    // All-zero head -> logit 0 -> probability one half everywhere.
    ModelArtifact zero = art;
    auto& hw = zero.params.at("fusion.head.w");
    std::fill(hw.data.begin(), hw.data.end(), 0.0f);
    zero.params.at("fusion.head.b").data[0] = 0.0f;
    const Prediction pz = predict(zero, subj.volume, subj.record);
    for (double p : pz.slice_probs) CHECK(p == doctest::Approx(0.5));
    CHECK(pz.subject_prob == doctest::Approx(0.5));

    // Window fingerprint mismatch is refused.
    const auto slices = preproc::preprocess_volume(subj.volume, tiny.window, 0);
    CHECK_THROWS_AS(
        static_cast<void>(predict_slices(art, slices, subj.record, "superior:5")),
        ValidationError);

    // Unseen center at prediction time falls back to pooled statistics.
    Standardizer st;
    st.fit({&tiny.cohort.subjects[0].record});
    cohort::ClinicalRecord other = subj.record;
    other.center = subj.record.center == cohort::Center::A ? cohort::Center::B
                                                           : cohort::Center::A;
    bool used_pooled = false;
    (void)st.transform(other, &used_pooled);
    CHECK(used_pooled);
}

TEST_CASE("standardizer centers per-center training features") {
    const TinyCohort tiny = strong_signal_cohort(41);
    std::vector<const cohort::ClinicalRecord*> recs;
    for (const auto& s : tiny.cohort.subjects) recs.push_back(&s.record);
    Standardizer st;
    st.fit(recs);
    // Per-center transformed features have column means ~0.
    for (const auto c : {cohort::Center::A, cohort::Center::B, cohort::Center::C}) {
        std::array<double, 7> mean{};
        int n = 0;
        for (const auto& s : tiny.cohort.subjects) {
            if (s.record.center != c) continue;
            const auto z = st.transform(s.record);
            for (int j = 0; j < 7; ++j) mean[static_cast<std::size_t>(j)] += z[static_cast<std::size_t>(j)];
            ++n;
        }
        REQUIRE(n > 0);
        for (int j = 0; j < 7; ++j)
            CHECK(std::fabs(mean[static_cast<std::size_t>(j)] / n) < 1e-6);
    }
}

TEST_CASE("zero-clinical retraining and fixed-epoch final runs work") {
    const TinyCohort tiny = strong_signal_cohort(51);
    ArchConfig arch;
    const ParamSet backbone = make_backbone_params(arch, 12);
    TrainConfig cfg;
    cfg.max_epochs = 4;
    cfg.early_stop_patience = 3;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.seed = 6;

    // Fixed-epoch mode runs exactly the requested epochs without validation.
    const ModelArtifact fixed = finetune(arch, backbone, tiny.cohort, tiny.train, {},
                                         tiny.window, 1.0, cfg, "", 3);
    CHECK(fixed.history.train_loss.size() == 3);
    CHECK(fixed.history.val_loss.empty());
    CHECK(fixed.history.best_epoch == 2);

    // Image-only training accepts and ignores clinical values downstream.
    const ModelArtifact imgonly = finetune(arch, backbone, tiny.cohort, tiny.train,
                                           tiny.val, tiny.window, 1.0, cfg, "", 0, true);
    const auto& subj = tiny.cohort.subjects[0];
    const auto pred = predict(imgonly, subj.volume, subj.record, true);
    CHECK(pred.slice_probs.size() == 5);
}

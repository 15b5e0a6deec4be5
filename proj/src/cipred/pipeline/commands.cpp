#include "cipred/pipeline/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cipred/baselines/grid_search.hpp"
#include "cipred/cohort/tables.hpp"
#include "cipred/cohort/volume_io.hpp"
#include "cipred/core/csv.hpp"
#include "cipred/core/sha256.hpp"
#include "cipred/core/threading.hpp"
#include "cipred/eval/reports.hpp"
#include "cipred/eval/svg.hpp"
#include "cipred/labeling/lmm.hpp"
#include "cipred/nnet/artifact.hpp"

namespace cipred::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid JSON in " + path);
    return j;
}

std::string labels_path(const PipelineConfig& cfg) {
    return join(cfg.paths.out_dir, "labels.csv");
}

std::string splits_path(const PipelineConfig& cfg) {
    return join(cfg.paths.out_dir, "splits.json");
}

std::string backbone_path(const PipelineConfig& cfg) {
    return join(cfg.paths.out_dir, "backbone.cima");
}

std::string model_path(const PipelineConfig& cfg) {
    return join(cfg.paths.out_dir, "model.cima");
}

nnet::ParamSet obtain_backbone(const PipelineConfig& cfg) {
    const std::string path = backbone_path(cfg);
    if (fs::exists(path)) {
        auto file = nnet::load_backbone(path);
        return std::move(file.backbone);
    }
    cmd_pretrain(cfg);
    return nnet::load_backbone(path).backbone;
}

json history_json(const nnet::TrainHistory& h) {
    return json{{"train_loss", h.train_loss},
                {"val_loss", h.val_loss},
                {"val_accuracy", h.val_accuracy},
                {"best_epoch", h.best_epoch}};
}

}  // namespace

cohort::CohortDataset load_cohort(const PipelineConfig& cfg) {
    const auto records =
        cohort::read_clinical_table(join(cfg.paths.cohort_dir, "clinical.csv"));
    const auto series =
        cohort::read_scores_table(join(cfg.paths.cohort_dir, "scores.csv"));
    cohort::AssembleReport report;
    auto cohort_data = cohort::assemble_cohort(
        records, series, join(cfg.paths.cohort_dir, "volumes"), &report);
    if (report.excluded() > 0) {
        json j{{"missing_volume", report.missing_volume},
               {"missing_series", report.missing_series},
               {"missing_record", report.missing_record}};
        ensure_dir(cfg.paths.out_dir);
        write_text(join(cfg.paths.out_dir, "exclusions.json"), j.dump(2) + "\n");
    }
    return cohort_data;
}

void apply_labels_file(cohort::CohortDataset& cohort, const std::string& labels_csv) {
    const csv::Table t = csv::read_file(labels_csv);
    const int c_id = t.column("subject_id");
    const int c_label = t.column("label");
    if (c_id < 0 || c_label < 0)
        throw FormatError("labels file missing subject_id/label columns: " + labels_csv);
    std::map<std::string, cohort::Label> labels;
    for (const auto& row : t.rows)
        labels[row[c_id]] = cohort::label_from_name(row[c_label]);
    for (auto& subj : cohort.subjects) {
        const auto it = labels.find(subj.record.subject_id);
        if (it == labels.end())
            throw ValidationError("no label for subject " + subj.record.subject_id);
        subj.label = it->second;
    }
}

std::vector<preproc::SliceSample> preprocess_cohort(const cohort::CohortDataset& cohort,
                                                    const preproc::SliceWindow& window,
                                                    double target_mm) {
    const int n = static_cast<int>(cohort.subjects.size());
    std::vector<std::vector<preproc::SliceSample>> per_subject(
        static_cast<std::size_t>(n));
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            per_subject[static_cast<std::size_t>(i)] = preproc::preprocess_volume(
                cohort.subjects[static_cast<std::size_t>(i)].volume, window,
                static_cast<int>(i), target_mm);
    });
    std::vector<preproc::SliceSample> all;
    for (auto& v : per_subject)
        for (auto& s : v) all.push_back(std::move(s));
    return all;
}

std::vector<preproc::SliceSample> slices_of_subjects(
    const std::vector<preproc::SliceSample>& all, const std::vector<int>& subjects) {
    std::vector<char> wanted;
    for (int s : subjects) {
        if (s >= static_cast<int>(wanted.size())) wanted.resize(static_cast<std::size_t>(s) + 1, 0);
        wanted[static_cast<std::size_t>(s)] = 1;
    }
    std::vector<preproc::SliceSample> out;
    for (const auto& s : all)
        if (s.subject < static_cast<int>(wanted.size()) && wanted[static_cast<std::size_t>(s.subject)])
            out.push_back(s);
    return out;
}

void write_splits_json(const eval::SplitPlan& plan, const cohort::CohortDataset& cohort,
                       const std::string& path) {
    auto ids = [&](const std::vector<int>& v) {
        std::vector<std::string> out;
        for (int i : v)
            out.push_back(cohort.subjects[static_cast<std::size_t>(i)].record.subject_id);
        return out;
    };
    json folds = json::array();
    for (const auto& f : plan.folds) folds.push_back(ids(f));
    const json j{{"seed", plan.seed},
                 {"test", ids(plan.test)},
                 {"folds", folds},
                 {"fingerprint", plan.fingerprint()}};
    write_text(path, j.dump(2) + "\n");
}

eval::SplitPlan read_splits_json(const std::string& path,
                                 const cohort::CohortDataset& cohort) {
    const json j = read_json_file(path);
    eval::SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    auto to_idx = [&](const std::vector<std::string>& ids) {
        std::vector<int> out;
        for (const auto& id : ids) {
            const int idx = cohort.index_of(id);
            if (idx < 0) throw ValidationError("split references unknown subject " + id);
            out.push_back(idx);
        }
        return out;
    };
    plan.test = to_idx(j.at("test").get<std::vector<std::string>>());
    for (const auto& f : j.at("folds"))
        plan.folds.push_back(to_idx(f.get<std::vector<std::string>>()));
    plan.validate_disjoint(static_cast<int>(cohort.subjects.size()));
    if (plan.fingerprint() != j.at("fingerprint").get<std::string>())
        throw ValidationError("split fingerprint mismatch in " + path);
    return plan;
}

// ----------------------------------------------------------------- generate

void cmd_generate(const PipelineConfig& cfg) {
    if (!cfg.synth) throw ConfigError("generate needs a synth section in the config");
    auto [cohort_data, truth] = synth::generate_cohort(*cfg.synth);

    ensure_dir(cfg.paths.cohort_dir);
    ensure_dir(join(cfg.paths.cohort_dir, "volumes"));

    std::vector<cohort::ClinicalRecord> records;
    std::vector<cohort::LongitudinalSeries> series;
    std::vector<std::string> files;
    for (const auto& subj : cohort_data.subjects) {
        records.push_back(subj.record);
        series.push_back(subj.series);
        const std::string rel = "volumes/" + subj.record.subject_id + ".rvol";
        cohort::write_volume(subj.volume, join(cfg.paths.cohort_dir, rel));
        files.push_back(rel);
    }
    cohort::write_clinical_table(records, join(cfg.paths.cohort_dir, "clinical.csv"));
    cohort::write_scores_table(series, join(cfg.paths.cohort_dir, "scores.csv"));
    synth::write_truth_csv(truth, join(cfg.paths.cohort_dir, "truth.csv"));
    files.insert(files.end(), {"clinical.csv", "scores.csv", "truth.csv"});

    json checksums = json::object();
    for (const auto& rel : files)
        checksums[rel] = Sha256::of_file(join(cfg.paths.cohort_dir, rel));
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const json manifest{
        {"checksums", checksums},
        {"n_subjects", cohort_data.subjects.size()},
        {"seed", cfg.seed},
        // The one intentionally non-reproducible field; reproducibility
        // comparisons must exclude it.
        {"timestamp",
         std::chrono::duration_cast<std::chrono::seconds>(now).count()}};
    write_text(join(cfg.paths.cohort_dir, "manifest.json"), manifest.dump(2) + "\n");
}

// -------------------------------------------------------------------- label

void cmd_label(const PipelineConfig& cfg) {
    const auto records =
        cohort::read_clinical_table(join(cfg.paths.cohort_dir, "clinical.csv"));
    const auto series = cohort::read_scores_table(join(cfg.paths.cohort_dir, "scores.csv"));
    std::map<std::string, const cohort::LongitudinalSeries*> series_of;
    for (const auto& s : series) series_of[s.subject_id] = &s;

    ensure_dir(cfg.paths.out_dir);
    csv::Table labels_out;
    labels_out.header = {"subject_id", "center", "slope", "label"};

    for (const cohort::Center c :
         {cohort::Center::A, cohort::Center::B, cohort::Center::C}) {
        std::vector<cohort::LongitudinalSeries> center_series;
        std::vector<const cohort::ClinicalRecord*> center_records;
        for (const auto& r : records) {
            if (r.center != c) continue;
            const auto it = series_of.find(r.subject_id);
            if (it == series_of.end())
                throw ValidationError("no scores for subject " + r.subject_id);
            center_series.push_back(*it->second);
            center_records.push_back(&r);
        }
        if (center_series.empty()) continue;
        if (center_series.size() < 3)
            throw ValidationError("center " + cohort::center_name(c) +
                                  " has fewer than 3 subjects");

        const labeling::LmmFit fit = labeling::fit_lmm(center_series, cfg.labeling);
        const auto slopes = labeling::blup_slopes(fit);
        const auto labels = labeling::median_split(slopes);

        const json fit_json{
            {"center", cohort::center_name(c)},
            {"beta0", fit.beta0},
            {"sigma2", fit.sigma2},
            {"psi", {{fit.psi(0, 0), fit.psi(0, 1)}, {fit.psi(1, 0), fit.psi(1, 1)}}},
            {"loglik", fit.loglik},
            {"converged", fit.converged},
            {"boundary", fit.boundary},
            {"iterations", fit.iterations}};
        write_text(join(cfg.paths.out_dir, "lmm_fit_" + cohort::center_name(c) + ".json"),
                   fit_json.dump(2) + "\n");

        for (const auto& r : center_records) {
            labels_out.rows.push_back({r->subject_id, cohort::center_name(c),
                                       csv::format_double(slopes.at(r->subject_id)),
                                       cohort::label_name(labels.at(r->subject_id))});
        }
    }
    if (labels_out.rows.empty()) throw ValidationError("no subjects labeled");
    csv::write_file(labels_path(cfg), labels_out);
}

// --------------------------------------------------------------- preprocess

void cmd_preprocess(const PipelineConfig& cfg) {
    if (cfg.paths.cache_dir.empty())
        throw ConfigError("preprocess needs paths.cache_dir");
    auto cohort_data = load_cohort(cfg);
    const auto slices = preprocess_cohort(cohort_data, cfg.window, cfg.target_mm);
    ensure_dir(cfg.paths.cache_dir);
    for (const auto& s : slices) {
        const auto& id =
            cohort_data.subjects[static_cast<std::size_t>(s.subject)].record.subject_id;
        char name[64];
        std::snprintf(name, sizeof(name), "%s_z%03d.rimg", id.c_str(), s.z);
        cohort::write_image(s.scaled, join(cfg.paths.cache_dir, name));
    }
    const json info{{"window", cfg.window.describe()},
                    {"target_mm", cfg.target_mm},
                    {"n_slices", slices.size()}};
    write_text(join(cfg.paths.cache_dir, "cache_info.json"), info.dump(2) + "\n");
}

// ----------------------------------------------------------------- pretrain

void cmd_pretrain(const PipelineConfig& cfg) {
    ensure_dir(cfg.paths.out_dir);
    const auto result = nnet::pretrain_backbone(cfg.arch, cfg.pretrain_task, cfg.pretrain);
    if (!result.reached_target)
        std::fprintf(stderr,
                     "warning: source-task validation accuracy %.3f below target %.3f\n",
                     result.val_accuracy, cfg.pretrain_task.target_accuracy);
    nnet::save_backbone(result.backbone, cfg.arch, result.history, backbone_path(cfg));
    const json report{{"val_accuracy", result.val_accuracy},
                      {"reached_target", result.reached_target},
                      {"history", history_json(result.history)}};
    write_text(join(cfg.paths.out_dir, "pretrain_history.json"), report.dump(2) + "\n");
}

// -------------------------------------------------------------------- train

void cmd_train(const PipelineConfig& cfg) {
    auto cohort_data = load_cohort(cfg);
    apply_labels_file(cohort_data, labels_path(cfg));
    ensure_dir(cfg.paths.out_dir);

    const eval::SplitPlan plan = eval::make_splits(cohort_data, cfg.seed);
    write_splits_json(plan, cohort_data, splits_path(cfg));

    const nnet::ParamSet backbone = obtain_backbone(cfg);
    const auto slices = preprocess_cohort(cohort_data, cfg.window, cfg.target_mm);

    json folds_json = json::array();
    std::vector<int> best_epochs;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        nnet::TrainConfig fold_cfg = cfg.train;
        fold_cfg.seed = derive_seed(cfg.seed, 0xf01d, f);
        const auto train_subjects = plan.train_subjects(static_cast<int>(f));
        const auto artifact = nnet::finetune(
            cfg.arch, backbone, cohort_data, slices_of_subjects(slices, train_subjects),
            slices_of_subjects(slices, plan.folds[f]), cfg.window, cfg.target_mm,
            fold_cfg, plan.fingerprint());
        best_epochs.push_back(artifact.history.best_epoch);
        folds_json.push_back({{"fold", f},
                              {"best_epoch", artifact.history.best_epoch},
                              {"history", history_json(artifact.history)}});
    }

    // Final model: all train+val subjects, run for the median best epoch
    // count (no validation data remains for early stopping).
    std::vector<int> sorted_epochs = best_epochs;
    std::sort(sorted_epochs.begin(), sorted_epochs.end());
    const int median_epochs = sorted_epochs[sorted_epochs.size() / 2] + 1;
    nnet::TrainConfig final_cfg = cfg.train;
    final_cfg.seed = derive_seed(cfg.seed, 0xf17a1);
    const auto final_artifact = nnet::finetune(
        cfg.arch, backbone, cohort_data, slices_of_subjects(slices, plan.all_train_val()),
        {}, cfg.window, cfg.target_mm, final_cfg, plan.fingerprint(), median_epochs);
    nnet::save_artifact(final_artifact, model_path(cfg));

    const json out{{"folds", folds_json},
                   {"final_epochs", median_epochs},
                   {"final_history", history_json(final_artifact.history)},
                   {"split_fingerprint", plan.fingerprint()}};
    write_text(join(cfg.paths.out_dir, "folds.json"), out.dump(2) + "\n");
}

// ---------------------------------------------------------------- baselines

namespace {

struct SplitRows {
    std::string name;
    std::vector<int> train_rows, eval_rows;
};

}  // namespace

void cmd_baselines(const PipelineConfig& cfg) {
    auto cohort_data = load_cohort(cfg);
    apply_labels_file(cohort_data, labels_path(cfg));
    ensure_dir(cfg.paths.out_dir);

    eval::SplitPlan plan;
    if (fs::exists(splits_path(cfg))) {
        plan = read_splits_json(splits_path(cfg), cohort_data);
    } else {
        plan = eval::make_splits(cohort_data, cfg.seed);
        write_splits_json(plan, cohort_data, splits_path(cfg));
    }

    const auto slices = preprocess_cohort(cohort_data, cfg.window, cfg.target_mm);
    const baselines::FeatureMatrix all_rows = baselines::flatten_features(slices);
    const std::vector<int> all_y = baselines::labels_for(cohort_data, all_rows);

    auto rows_of_subjects = [&](const std::vector<int>& subjects) {
        std::vector<char> wanted(cohort_data.subjects.size(), 0);
        for (int s : subjects) wanted[static_cast<std::size_t>(s)] = 1;
        std::vector<int> rows;
        for (int i = 0; i < all_rows.n; ++i)
            if (wanted[static_cast<std::size_t>(all_rows.keys[static_cast<std::size_t>(i)].subject)])
                rows.push_back(i);
        return rows;
    };

    std::vector<SplitRows> splits;
    for (std::size_t f = 0; f < plan.folds.size(); ++f)
        splits.push_back({"fold" + std::to_string(f),
                          rows_of_subjects(plan.train_subjects(static_cast<int>(f))),
                          rows_of_subjects(plan.folds[f])});
    splits.push_back({"test", rows_of_subjects(plan.all_train_val()),
                      rows_of_subjects(plan.test)});

    csv::Table results;
    results.header = {"reducer", "k",    "model", "hyperparams", "split",
                      "acc",     "sens", "spec",  "auc"};
    csv::Table grid_table;
    grid_table.header = {"reducer", "model", "split", "hyperparams", "mean_auc"};

    for (const auto& reducer_name_str : cfg.baselines_cfg.reducers) {
        const auto method = baselines::reducer_from_name(reducer_name_str);
        for (const auto& split : splits) {
            const auto xtr_full = baselines::take_rows(all_rows, split.train_rows);
            const auto xev_full = baselines::take_rows(all_rows, split.eval_rows);
            std::vector<int> ytr, yev;
            for (int i : split.train_rows) ytr.push_back(all_y[static_cast<std::size_t>(i)]);
            for (int i : split.eval_rows) yev.push_back(all_y[static_cast<std::size_t>(i)]);

            int k = cfg.baselines_cfg.k;
            k = std::min(k, xtr_full.p);
            if (method == baselines::ReducerMethod::pca)
                k = std::min(k, xtr_full.n - 1);
            const auto reducer = baselines::fit_reducer(
                method, xtr_full, k, derive_seed(cfg.seed, 0x4ed + static_cast<std::uint64_t>(method),
                            hash_str(split.name)),
                &ytr,
                cfg.baselines_cfg.reducer_opts);
            const auto xtr = baselines::apply_reducer(reducer, xtr_full);
            const auto xev = baselines::apply_reducer(reducer, xev_full);

            for (const auto& model_name : cfg.baselines_cfg.models) {
                const auto kind = baselines::baseline_from_name(model_name);
                const auto grid = baselines::default_grid(kind);
                const auto search = baselines::grid_search(
                    kind, grid, xtr, ytr, cfg.baselines_cfg.inner_folds,
                    cfg.baselines_cfg.n_draws,
                    derive_seed(cfg.seed, 0x6d, static_cast<std::uint64_t>(method),
                                hash_str(split.name + model_name)));
                for (const auto& row : search.table)
                    grid_table.rows.push_back({reducer_name_str, model_name, split.name,
                                               row.hp.canonical(),
                                               csv::format_double(row.mean_auc)});
                const auto fitted = baselines::fit_baseline(
                    kind, search.best, xtr, ytr,
                    derive_seed(cfg.seed, 0xf1, static_cast<std::uint64_t>(method)));
                const auto scores = baselines::predict_baseline(fitted, xev);
                const auto report =
                    eval::compute_metrics(scores, yev, fitted.threshold, "slice");
                results.rows.push_back(
                    {reducer_name_str, std::to_string(k), model_name,
                     search.best.canonical(), split.name, csv::format_double(report.acc),
                     report.sens_defined ? csv::format_double(report.sens) : "undefined",
                     report.spec_defined ? csv::format_double(report.spec) : "undefined",
                     report.auc_defined ? csv::format_double(report.auc) : "undefined"});
            }
        }
    }
    csv::write_file(join(cfg.paths.out_dir, "baselines_results.csv"), results);
    csv::write_file(join(cfg.paths.out_dir, "baselines_grid.csv"), grid_table);
}

// ----------------------------------------------------------------- evaluate

void cmd_evaluate(const PipelineConfig& cfg) {
    auto cohort_data = load_cohort(cfg);
    apply_labels_file(cohort_data, labels_path(cfg));
    ensure_dir(cfg.paths.out_dir);

    const nnet::ModelArtifact artifact = nnet::load_artifact(model_path(cfg));
    const eval::SplitPlan plan = read_splits_json(splits_path(cfg), cohort_data);
    if (artifact.split_fingerprint != plan.fingerprint())
        throw ValidationError(
            "split fingerprint mismatch between model artifact and splits.json");

    const auto slices = preprocess_cohort(cohort_data, artifact.window, artifact.target_mm);
    const auto test_slices = slices_of_subjects(slices, plan.test);
    if (test_slices.empty()) throw ValidationError("empty test slice set");

    // Fused and image-only scores per test slice.
    eval::EvalKeys keys;
    std::vector<double> fused_scores, neural_scores, clinical_scores;

    std::optional<nnet::ModelArtifact> retrained;
    if (cfg.eval_cfg.neural_only_mode == "retrain") {
        nnet::TrainConfig rcfg = cfg.train;
        rcfg.seed = derive_seed(cfg.seed, 0xab1a7e);
        const nnet::ParamSet backbone = obtain_backbone(cfg);
        retrained = nnet::finetune(
            artifact.arch, backbone, cohort_data,
            slices_of_subjects(slices, plan.train_subjects(0)),
            slices_of_subjects(slices, plan.folds[0]), artifact.window,
            artifact.target_mm, rcfg, plan.fingerprint(), 0, true);
    }

    // Clinical-only comparison model on the train+val subjects.
    std::vector<std::array<double, 7>> clin_rows;
    std::vector<int> clin_y;
    for (int s : plan.all_train_val()) {
        const auto& subj = cohort_data.subjects[static_cast<std::size_t>(s)];
        clin_rows.push_back(subj.record.features());
        clin_y.push_back(subj.label == cohort::Label::high ? 1 : 0);
    }
    const auto logistic = baselines::LogisticModel::fit(clin_rows, clin_y);

    for (int s : plan.test) {
        const auto& subj = cohort_data.subjects[static_cast<std::size_t>(s)];
        std::vector<preproc::SliceSample> subj_slices;
        for (const auto& sl : test_slices)
            if (sl.subject == s) subj_slices.push_back(sl);
        const auto fused = nnet::predict_slices(artifact, subj_slices, subj.record,
                                                artifact.window.describe(), false);
        const auto neural =
            retrained ? nnet::predict_slices(*retrained, subj_slices, subj.record,
                                             artifact.window.describe(), true)
                      : nnet::predict_slices(artifact, subj_slices, subj.record,
                                             artifact.window.describe(), true);
        const double clin_prob = logistic.prob(subj.record.features());
        for (std::size_t i = 0; i < subj_slices.size(); ++i) {
            keys.subject.push_back(s);
            keys.label.push_back(subj.label == cohort::Label::high ? 1 : 0);
            keys.center.push_back(subj.record.center);
            keys.language.push_back(subj.record.language);
            fused_scores.push_back(fused.slice_probs[i]);
            neural_scores.push_back(neural.slice_probs[i]);
            clinical_scores.push_back(clin_prob);
        }
    }

    std::vector<eval::ScoredModel> models = {
        {"fused", "clinical+neural", fused_scores, cfg.eval_cfg.threshold},
        {"neural_only", "neural", neural_scores, cfg.eval_cfg.threshold},
        {"clinical_only", "clinical", clinical_scores, cfg.eval_cfg.threshold}};

    std::vector<eval::Subset> subsets;
    for (const auto& s : cfg.eval_cfg.subsets) subsets.push_back(eval::Subset::parse(s));
    const auto rows = eval::compare_models(keys, models, subsets,
                                           cfg.eval_cfg.bootstrap_B, cfg.seed);
    write_comparison_csv(rows, join(cfg.paths.out_dir, "comparison.csv"));

    // Raw slice scores for downstream plotting.
    {
        csv::Table t;
        t.header = {"subject_id", "z", "label", "fused", "neural_only", "clinical_only"};
        int cursor = 0;
        for (int s : plan.test) {
            const auto& subj = cohort_data.subjects[static_cast<std::size_t>(s)];
            for (const auto& sl : test_slices) {
                if (sl.subject != s) continue;
                t.rows.push_back({subj.record.subject_id, std::to_string(sl.z),
                                  std::to_string(keys.label[static_cast<std::size_t>(cursor)]),
                                  csv::format_double(fused_scores[static_cast<std::size_t>(cursor)]),
                                  csv::format_double(neural_scores[static_cast<std::size_t>(cursor)]),
                                  csv::format_double(clinical_scores[static_cast<std::size_t>(cursor)])});
                ++cursor;
            }
        }
        csv::write_file(join(cfg.paths.out_dir, "scores.csv"), t);
    }

    // report.json: canonical (alphabetical) key order, no timestamp.
    json rows_json = json::array();
    auto report_to_json = [](const eval::MetricsReport& r) {
        return json{{"level", r.level},
                    {"n", r.n},
                    {"threshold", r.threshold},
                    {"counts",
                     {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp},
                      {"fn", r.counts.fn}}},
                    {"acc", r.acc},
                    {"acc_ci", {r.acc_ci[0], r.acc_ci[1]}},
                    {"sens", r.sens_defined ? json(r.sens) : json()},
                    {"sens_ci", {r.sens_ci[0], r.sens_ci[1]}},
                    {"spec", r.spec_defined ? json(r.spec) : json()},
                    {"spec_ci", {r.spec_ci[0], r.spec_ci[1]}},
                    {"auc", r.auc_defined ? json(r.auc) : json()},
                    {"auc_ci", {r.auc_ci[0], r.auc_ci[1]}},
                    {"ci_unstable", r.ci_unstable}};
    };
    for (const auto& r : rows)
        rows_json.push_back({{"subset", r.subset},
                             {"model", r.model},
                             {"modality", r.modality},
                             {"slice", report_to_json(r.slice_report)},
                             {"subject", report_to_json(r.subject_report)}});
    const json report{{"version", cfg.version},
                      {"seed", cfg.seed},
                      {"split_fingerprint", plan.fingerprint()},
                      {"bootstrap_B", cfg.eval_cfg.bootstrap_B},
                      {"rows", rows_json}};
    validate_report_json(report);
    write_text(join(cfg.paths.out_dir, "report.json"), report.dump(2) + "\n");

    // Correlation matrices per center need the fitted slopes.
    {
        const csv::Table t = csv::read_file(labels_path(cfg));
        const int c_id = t.column("subject_id"), c_slope = t.column("slope");
        std::map<std::string, double> slopes;
        for (const auto& row : t.rows)
            slopes[row[c_id]] = csv::parse_double(row[c_slope], "labels.csv");
        ensure_dir(join(cfg.paths.out_dir, "correlations"));
        for (const auto c : {cohort::Center::A, cohort::Center::B, cohort::Center::C}) {
            std::vector<const cohort::ClinicalRecord*> recs;
            for (const auto& subj : cohort_data.subjects)
                if (subj.record.center == c) recs.push_back(&subj.record);
            if (recs.size() < 3) continue;
            const auto m = eval::correlation_matrix(recs, slopes);
            eval::write_correlation_csv(
                m, join(cfg.paths.out_dir,
                        "correlations/" + cohort::center_name(c) + ".csv"));
        }
    }

    if (cfg.eval_cfg.plots) {
        ensure_dir(join(cfg.paths.out_dir, "plots"));
        eval::plot_training_curves(artifact.history.train_loss,
                                   artifact.history.val_loss,
                                   join(cfg.paths.out_dir, "plots/training_curves.svg"));
        eval::plot_roc(fused_scores, keys.label,
                       join(cfg.paths.out_dir, "plots/roc_fused.svg"));
        eval::plot_roc(neural_scores, keys.label,
                       join(cfg.paths.out_dir, "plots/roc_neural_only.svg"));
        eval::plot_roc(clinical_scores, keys.label,
                       join(cfg.paths.out_dir, "plots/roc_clinical_only.svg"));
        for (const auto c : {cohort::Center::A, cohort::Center::B, cohort::Center::C}) {
            if (cohort_data.subjects_of_center(c).empty()) continue;
            eval::plot_spaghetti(cohort_data, c,
                                 join(cfg.paths.out_dir,
                                      "plots/spaghetti_" + cohort::center_name(c) + ".svg"));
        }
    }
}

// -------------------------------------------------------------- sensitivity

void cmd_sensitivity(const PipelineConfig& cfg) {
    auto cohort_data = load_cohort(cfg);
    apply_labels_file(cohort_data, labels_path(cfg));
    ensure_dir(cfg.paths.out_dir);

    eval::SplitPlan plan;
    if (fs::exists(splits_path(cfg))) {
        plan = read_splits_json(splits_path(cfg), cohort_data);
    } else {
        plan = eval::make_splits(cohort_data, cfg.seed);
        write_splits_json(plan, cohort_data, splits_path(cfg));
    }
    const nnet::ParamSet backbone = obtain_backbone(cfg);

    std::vector<preproc::WindowPosition> windows;
    for (const auto& w : cfg.sensitivity_cfg.windows) {
        if (w == "superior") windows.push_back(preproc::WindowPosition::superior);
        else if (w == "central") windows.push_back(preproc::WindowPosition::central);
        else if (w == "inferior") windows.push_back(preproc::WindowPosition::inferior);
        else throw ConfigError("unknown sensitivity window '" + w + "'");
    }

    int config_index = 0;
    const auto rows = eval::sensitivity_analysis(
        windows, cfg.sensitivity_cfg.counts,
        [&](const preproc::SliceWindow& w) {
            const auto slices = preprocess_cohort(cohort_data, w, cfg.target_mm);
            nnet::TrainConfig scfg = cfg.train;
            scfg.seed = derive_seed(cfg.seed, 0x5e15, static_cast<std::uint64_t>(config_index));
            ++config_index;
            // Image-only training, mirroring the slice-window sweep setup.
            const auto artifact = nnet::finetune(
                cfg.arch, backbone, cohort_data,
                slices_of_subjects(slices, plan.train_subjects(0)),
                slices_of_subjects(slices, plan.folds[0]), w, cfg.target_mm, scfg,
                plan.fingerprint(), 0, true);
            std::vector<double> scores;
            std::vector<int> labels;
            for (int s : plan.test) {
                const auto& subj = cohort_data.subjects[static_cast<std::size_t>(s)];
                std::vector<preproc::SliceSample> subj_slices;
                for (const auto& sl : slices)
                    if (sl.subject == s) subj_slices.push_back(sl);
                const auto pred = nnet::predict_slices(artifact, subj_slices, subj.record,
                                                       w.describe(), true);
                for (double p : pred.slice_probs) {
                    scores.push_back(p);
                    labels.push_back(subj.label == cohort::Label::high ? 1 : 0);
                }
            }
            return eval::auc(scores, labels);
        });
    write_sensitivity_csv(rows, join(cfg.paths.out_dir, "sensitivity.csv"));
}

// ------------------------------------------------------------------- report

void cmd_report(const PipelineConfig& cfg) {
    const json report = read_json_file(join(cfg.paths.out_dir, "report.json"));
    validate_report_json(report);

    std::ostringstream summary;
    summary << "evaluation summary (split " << report.at("split_fingerprint").get<std::string>()
            << ")\n";
    for (const auto& row : report.at("rows")) {
        const auto& slice = row.at("slice");
        summary << "  subset=" << row.at("subset").get<std::string>()
                << " model=" << row.at("model").get<std::string>() << " slice-auc=";
        if (slice.at("auc").is_null())
            summary << "undefined";
        else
            summary << slice.at("auc").get<double>();
        summary << " acc=" << slice.at("acc").get<double>() << "\n";
    }
    write_text(join(cfg.paths.out_dir, "summary.txt"), summary.str());

    if (cfg.eval_cfg.plots && fs::exists(join(cfg.paths.out_dir, "scores.csv"))) {
        const csv::Table t = csv::read_file(join(cfg.paths.out_dir, "scores.csv"));
        const int c_label = t.column("label");
        ensure_dir(join(cfg.paths.out_dir, "plots"));
        for (const std::string model : {"fused", "neural_only", "clinical_only"}) {
            const int c = t.column(model);
            if (c < 0) continue;
            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto& row : t.rows) {
                scores.push_back(csv::parse_double(row[c], "scores.csv"));
                labels.push_back(static_cast<int>(csv::parse_int(row[c_label], "scores.csv")));
            }
            eval::plot_roc(scores, labels,
                           join(cfg.paths.out_dir, "plots/roc_" + model + ".svg"));
        }
    }
}

void validate_report_json(const json& report) {
    for (const char* key : {"version", "seed", "split_fingerprint", "bootstrap_B", "rows"})
        if (!report.contains(key))
            throw FormatError(std::string("report.json missing key '") + key + "'");
    if (!report.at("rows").is_array())
        throw FormatError("report.json rows must be an array");
    for (const auto& row : report.at("rows")) {
        for (const char* key : {"subset", "model", "modality", "slice", "subject"})
            if (!row.contains(key))
                throw FormatError(std::string("report row missing key '") + key + "'");
        for (const char* level : {"slice", "subject"}) {
            const auto& rep = row.at(level);
            for (const char* key :
                 {"level", "n", "threshold", "counts", "acc", "acc_ci", "sens", "spec",
                  "auc", "auc_ci", "ci_unstable"})
                if (!rep.contains(key))
                    throw FormatError(std::string("report metrics missing key '") + key +
                                      "'");
        }
    }
}

}  // namespace cipred::pipeline

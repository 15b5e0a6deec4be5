#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "cipred/cohort/tables.hpp"
#include "cipred/core/csv.hpp"
#include "cipred/core/sha256.hpp"
#include "cipred/nnet/artifact.hpp"
#include "cipred/pipeline/commands.hpp"
#include "cipred/pipeline/config.hpp"

using namespace cipred;
using namespace cipred::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("cipred_pipe_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

json smoke_config(const TempDir& tmp) {
    return json{
        {"seed", 7},
        {"paths",
         {{"cohort_dir", tmp.str("cohort")}, {"out_dir", tmp.str("out")}}},
        {"synth",
         {{"centers",
           json::array({{{"center", "A"},
                         {"n_subjects", 8},
                         {"languages", {{"english", 5}, {"spanish", 3}}},
                         {"times", {0, 6, 12, 24}}},
                        {{"center", "B"},
                         {"n_subjects", 8},
                         {"languages", {{"english", 8}}},
                         {"times", {0, 12, 24, 36}}},
                        {{"center", "C"},
                         {"n_subjects", 8},
                         {"languages", {{"cantonese", 8}}},
                         {"times", {0, 6, 12, 24}}}})},
          {"dims", {32, 32, 24}},
          {"kappa_img", 2.0},
          {"kappa_clin", 0.2},
          {"signal_window", {{"position", "central"}, {"count", 3}}},
          {"signal_jitter_vox", 2.0},
          {"score_noise_sd", 0.0}}},
        {"window", {{"position", "central"}, {"count", 3}}},
        {"pretrain_task",
         {{"n_train", 96}, {"n_val", 32}, {"image_size", 48}, {"target_accuracy", 0.8}}},
        {"pretrain", {{"max_epochs", 4}, {"early_stop_patience", 3}, {"batch_size", 32}}},
        {"train",
         {{"max_epochs", 3},
          {"early_stop_patience", 2},
          {"batch_size", 16},
          {"learning_rate", 0.001}}},
        {"baselines",
         {{"reducers", {"ufs", "pca"}},
          {"k", 8},
          {"models", {"ridge", "knn"}},
          {"n_draws", 2},
          {"inner_folds", 3}}},
        {"eval", {{"bootstrap_B", 50}, {"subsets", {"all", "center=A"}}}},
        {"sensitivity", {{"windows", {"central", "superior"}}, {"counts", {3}}}},
    };
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CIPRED_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config parsing validates keys and applies overrides") {
    TempDir tmp("cfg");
    json cfg = smoke_config(tmp);
    CHECK_NOTHROW(parse_config(cfg));

    json bad = cfg;
    bad["trian"] = json::object();
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    json bad2 = cfg;
    bad2["train"]["batchsize"] = 3;
    CHECK_THROWS_AS(parse_config(bad2), ConfigError);
    json bad3 = cfg;
    bad3["synth"]["centers"][0]["n_subjects"] = 0;
    CHECK_THROWS_AS(parse_config(bad3), ConfigError);

    json over = cfg;
    apply_override(over, "train.batch_size=8");
    apply_override(over, "paths.cache_dir=" + tmp.str("cache"));
    const PipelineConfig parsed = parse_config(over);
    CHECK(parsed.train.batch_size == 8);
    CHECK(parsed.paths.cache_dir == tmp.str("cache"));
    CHECK_THROWS_AS(apply_override(over, "no_equals_sign"), ConfigError);
}

TEST_CASE("generate, label and the full smoke pipeline produce coherent outputs") {
    TempDir tmp("smoke");
    const PipelineConfig cfg = parse_config(smoke_config(tmp));

    cmd_generate(cfg);
    CHECK(fs::exists(tmp.str("cohort/clinical.csv")));
    CHECK(fs::exists(tmp.str("cohort/scores.csv")));
    CHECK(fs::exists(tmp.str("cohort/truth.csv")));
    CHECK(fs::exists(tmp.str("cohort/manifest.json")));
    int volumes = 0;
    for (const auto& e : fs::directory_iterator(tmp.str("cohort/volumes"))) {
        CHECK(e.path().extension() == ".rvol");
        ++volumes;
    }
    CHECK(volumes == 24);

    // Regenerating yields identical checksums (the manifest timestamp is the
    // one excluded field).
    json manifest1, manifest2;
    {
        std::ifstream in(tmp.str("cohort/manifest.json"));
        in >> manifest1;
    }
    cmd_generate(cfg);
    {
        std::ifstream in(tmp.str("cohort/manifest.json"));
        in >> manifest2;
    }
    CHECK(manifest1.at("checksums") == manifest2.at("checksums"));

    // Labeling a noiseless cohort reproduces the generator truth exactly.
    cmd_label(cfg);
    const csv::Table labels = csv::read_file(tmp.str("out/labels.csv"));
    const csv::Table truth = csv::read_file(tmp.str("cohort/truth.csv"));
    REQUIRE(labels.rows.size() == truth.rows.size());
    std::map<std::string, std::string> truth_of;
    for (const auto& row : truth.rows) truth_of[row[0]] = row[1];
    std::map<std::string, int> high_per_center;
    std::map<std::string, int> count_per_center;
    for (const auto& row : labels.rows) {
        CHECK(truth_of.at(row[0]) == row[3]);
        count_per_center[row[1]] += 1;
        high_per_center[row[1]] += row[3] == "high";
    }
    for (const auto& [center, total] : count_per_center)
        CHECK(std::abs(2 * high_per_center[center] - total) <= 1);

    // Byte-identical labels on rerun.
    const std::string labels_bytes = file_bytes(tmp.str("out/labels.csv"));
    cmd_label(cfg);
    CHECK(file_bytes(tmp.str("out/labels.csv")) == labels_bytes);

    // Training writes a loadable artifact plus fold histories and splits.
    cmd_train(cfg);
    CHECK(fs::exists(tmp.str("out/model.cima")));
    CHECK(fs::exists(tmp.str("out/splits.json")));
    CHECK(fs::exists(tmp.str("out/folds.json")));
    const auto artifact = nnet::load_artifact(tmp.str("out/model.cima"));
    CHECK(artifact.window.describe() == "central:3");
    {
        std::ifstream in(tmp.str("out/folds.json"));
        json folds;
        in >> folds;
        CHECK(folds.at("folds").size() == 5);
        for (const auto& f : folds.at("folds")) {
            const auto& hist = f.at("history");
            const int best = f.at("best_epoch").get<int>();
            const int epochs = static_cast<int>(hist.at("val_loss").size());
            CHECK(best >= 0);
            CHECK(best < epochs);
            // patience bound: no fold runs beyond best + patience epochs
            CHECK(epochs <= best + 1 + 2);
            CHECK(hist.at("train_loss").size() == hist.at("val_loss").size());
        }
    }

    // Evaluation produces the report bundle and validates its own schema.
    cmd_evaluate(cfg);
    CHECK(fs::exists(tmp.str("out/report.json")));
    CHECK(fs::exists(tmp.str("out/comparison.csv")));
    CHECK(fs::exists(tmp.str("out/scores.csv")));
    CHECK(fs::exists(tmp.str("out/correlations/A.csv")));
    CHECK(fs::exists(tmp.str("out/plots/roc_fused.svg")));
    CHECK(fs::exists(tmp.str("out/plots/training_curves.svg")));
    {
        std::ifstream in(tmp.str("out/report.json"));
        json report;
        in >> report;
        CHECK_NOTHROW(validate_report_json(report));
        // Three modality rows for each subset.
        std::set<std::string> models_seen;
        for (const auto& row : report.at("rows"))
            if (row.at("subset") == "all")
                models_seen.insert(row.at("model").get<std::string>());
        CHECK(models_seen ==
              std::set<std::string>{"fused", "neural_only", "clinical_only"});
    }
    // Rerunning evaluation is byte-identical.
    const std::string report_bytes = file_bytes(tmp.str("out/report.json"));
    const std::string comparison_bytes = file_bytes(tmp.str("out/comparison.csv"));
    cmd_evaluate(cfg);
    CHECK(file_bytes(tmp.str("out/report.json")) == report_bytes);
    CHECK(file_bytes(tmp.str("out/comparison.csv")) == comparison_bytes);

    // The summary/report command renders from the persisted outputs.
    cmd_report(cfg);
    CHECK(fs::exists(tmp.str("out/summary.txt")));

    // Baselines write the sweep and grid tables on the shared split plan.
    cmd_baselines(cfg);
    const csv::Table results = csv::read_file(tmp.str("out/baselines_results.csv"));
    CHECK(results.rows.size() == 2 * 6 * 2);  // reducers x splits x models
    CHECK(fs::exists(tmp.str("out/baselines_grid.csv")));

    // Sensitivity sweep emits one row per configuration.
    cmd_sensitivity(cfg);
    const csv::Table sens = csv::read_file(tmp.str("out/sensitivity.csv"));
    CHECK(sens.rows.size() == 2);

    // Preprocess cache writes one image per (subject, slice).
    PipelineConfig cache_cfg = cfg;
    cache_cfg.paths.cache_dir = tmp.str("cache");
    cmd_preprocess(cache_cfg);
    int cached = 0;
    for (const auto& e : fs::directory_iterator(tmp.str("cache")))
        cached += e.path().extension() == ".rimg";
    CHECK(cached == 24 * 3);
}

TEST_CASE("evaluate refuses mismatched split fingerprints") {
    TempDir tmp("fp");
    PipelineConfig cfg = parse_config(smoke_config(tmp));
    cmd_generate(cfg);
    cmd_label(cfg);
    cmd_train(cfg);

    // Replace splits.json with a plan from a different seed.
    auto cohort_data = load_cohort(cfg);
    apply_labels_file(cohort_data, tmp.str("out/labels.csv"));
    const auto other = eval::make_splits(cohort_data, 999);
    write_splits_json(other, cohort_data, tmp.str("out/splits.json"));
    CHECK_THROWS_AS(cmd_evaluate(cfg), ValidationError);
}

TEST_CASE("cli binary: exit codes and dry runs") {
    TempDir tmp("cli");
    const json cfg = smoke_config(tmp);
    const std::string cfg_path = tmp.str("config.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2);
    }
    CHECK(run_cli("generate --config " + cfg_path + " --dry-run") == 0);
    CHECK(run_cli("generate --config " + tmp.str("missing.json")) == 2);
    CHECK(run_cli("train --config " + cfg_path) == 3);  // no cohort yet

    // Unknown key in the config file -> config error.
    json bad = cfg;
    bad["bogus_section"] = 1;
    const std::string bad_path = tmp.str("bad.json");
    {
        std::ofstream out(bad_path);
        out << bad.dump();
    }
    CHECK(run_cli("label --config " + bad_path) == 2);

    // Invalid synth spec fails before writing anything.
    json zero = cfg;
    zero["synth"]["centers"][0]["n_subjects"] = 0;
    const std::string zero_path = tmp.str("zero.json");
    {
        std::ofstream out(zero_path);
        out << zero.dump();
    }
    CHECK(run_cli("generate --config " + zero_path) == 2);
    CHECK_FALSE(fs::exists(tmp.str("cohort/clinical.csv")));

    // A real generate + label through the binary.
    CHECK(run_cli("generate --config " + cfg_path) == 0);
    CHECK(run_cli("label --config " + cfg_path) == 0);
    CHECK(fs::exists(tmp.str("out/labels.csv")));

    // --set override propagates (cache dir) and preprocess succeeds.
    CHECK(run_cli("preprocess --config " + cfg_path + " --set paths.cache_dir=" +
                  tmp.str("cache2")) == 0);
    CHECK(fs::exists(tmp.str("cache2/cache_info.json")));
}

#include "cipred/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "cipred/baselines/models.hpp"

namespace cipred::pipeline {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + where + "." + key + "'");
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

preproc::WindowPosition position_from_name(const std::string& s) {
    if (s == "superior") return preproc::WindowPosition::superior;
    if (s == "central") return preproc::WindowPosition::central;
    if (s == "inferior") return preproc::WindowPosition::inferior;
    if (s == "explicit") return preproc::WindowPosition::explicit_range;
    throw ConfigError("unknown window position '" + s + "'");
}

nnet::TrainConfig train_from_json(const json& j, const std::string& where,
                                  nnet::TrainConfig base) {
    require_keys(j, {"learning_rate", "beta1", "beta2", "eps", "batch_size",
                     "max_epochs", "early_stop_patience", "weight_decay",
                     "dropout_rate"},
                 where);
    opt(j, "learning_rate", base.learning_rate);
    opt(j, "beta1", base.beta1);
    opt(j, "beta2", base.beta2);
    opt(j, "eps", base.eps);
    opt(j, "batch_size", base.batch_size);
    opt(j, "max_epochs", base.max_epochs);
    opt(j, "early_stop_patience", base.early_stop_patience);
    opt(j, "weight_decay", base.weight_decay);
    opt(j, "dropout_rate", base.dropout_rate);
    return base;
}

synth::SynthSpec synth_from_json(const json& j) {
    require_keys(j, {"centers", "dims", "spacing", "kappa_img", "kappa_clin",
                     "signal_window", "slope_mean_high", "slope_mean_low", "slope_sd",
                     "intercept_mean", "intercept_sd", "score_noise_sd",
                     "voxel_noise_sd", "signal_jitter_vox"},
                 "synth");
    synth::SynthSpec s;
    if (!j.contains("centers") || !j.at("centers").is_array() || j.at("centers").empty())
        throw ConfigError("synth.centers must be a non-empty array");
    s.centers.clear();
    for (const auto& cj : j.at("centers")) {
        require_keys(cj, {"center", "n_subjects", "languages", "times"},
                     "synth.centers[]");
        synth::CenterSpec cs;
        cs.center = cohort::center_from_name(cj.at("center").get<std::string>());
        cs.n_subjects = cj.at("n_subjects").get<int>();
        if (cj.contains("languages"))
            for (const auto& [lang, count] : cj.at("languages").items())
                cs.languages.emplace_back(cohort::language_from_name(lang),
                                          count.get<int>());
        cs.times = cj.at("times").get<std::vector<double>>();
        s.centers.push_back(std::move(cs));
    }
    if (j.contains("dims")) {
        const auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 3) throw ConfigError("synth.dims must have 3 entries");
        s.nx = dims[0];
        s.ny = dims[1];
        s.nz = dims[2];
    }
    if (j.contains("spacing")) {
        const auto sp = j.at("spacing").get<std::vector<double>>();
        if (sp.size() != 3) throw ConfigError("synth.spacing must have 3 entries");
        s.sx = sp[0];
        s.sy = sp[1];
        s.sz = sp[2];
    }
    opt(j, "kappa_img", s.kappa_img);
    opt(j, "kappa_clin", s.kappa_clin);
    if (j.contains("signal_window")) s.signal_region = window_from_config(j.at("signal_window"));
    opt(j, "slope_mean_high", s.slope_mean_high);
    opt(j, "slope_mean_low", s.slope_mean_low);
    opt(j, "slope_sd", s.slope_sd);
    opt(j, "intercept_mean", s.intercept_mean);
    opt(j, "intercept_sd", s.intercept_sd);
    opt(j, "score_noise_sd", s.score_noise_sd);
    opt(j, "voxel_noise_sd", s.voxel_noise_sd);
    opt(j, "signal_jitter_vox", s.signal_jitter_vox);
    return s;
}

}  // namespace

preproc::SliceWindow window_from_config(const json& j) {
    require_keys(j, {"position", "count", "start", "end"}, "window");
    preproc::SliceWindow w;
    if (j.contains("position"))
        w.position = position_from_name(j.at("position").get<std::string>());
    opt(j, "count", w.count);
    opt(j, "start", w.start);
    opt(j, "end", w.end);
    if (w.position == preproc::WindowPosition::explicit_range)
        w.count = w.end - w.start + 1;
    return w;
}

void PipelineConfig::validate() const {
    if (paths.out_dir.empty()) throw ConfigError("paths.out_dir must be set");
    if (paths.cohort_dir.empty()) throw ConfigError("paths.cohort_dir must be set");
    if (target_mm <= 0) throw ConfigError("target_mm must be positive");
    try {
        train.validate();
        pretrain.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (synth) {
        try {
            synth->validate();
        } catch (const ValidationError& e) {
            throw ConfigError(std::string("synth: ") + e.what());
        }
    }
    if (baselines_cfg.k < 1) throw ConfigError("baselines.k must be >= 1");
    if (baselines_cfg.inner_folds < 2)
        throw ConfigError("baselines.inner_folds must be >= 2");
    if (baselines_cfg.n_draws < 1) throw ConfigError("baselines.n_draws must be >= 1");
    for (const auto& r : baselines_cfg.reducers) baselines::reducer_from_name(r);
    for (const auto& m : baselines_cfg.models) baselines::baseline_from_name(m);
    if (eval_cfg.bootstrap_B < 10) throw ConfigError("eval.bootstrap_B too small");
    if (eval_cfg.neural_only_mode != "ablate" && eval_cfg.neural_only_mode != "retrain")
        throw ConfigError("eval.neural_only_mode must be 'ablate' or 'retrain'");
    for (const int c : sensitivity_cfg.counts)
        if (c < 1) throw ConfigError("sensitivity.counts entries must be >= 1");
}

PipelineConfig parse_config(const json& j) {
    require_keys(j, {"version", "seed", "threads", "paths", "synth", "labeling",
                     "window", "target_mm", "arch", "pretrain_task", "pretrain",
                     "train", "baselines", "eval", "sensitivity"},
                 "config");
    PipelineConfig c;
    opt(j, "version", c.version);
    opt(j, "seed", c.seed);
    opt(j, "threads", c.threads);

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        require_keys(p, {"cohort_dir", "out_dir", "cache_dir"}, "paths");
        opt(p, "cohort_dir", c.paths.cohort_dir);
        opt(p, "out_dir", c.paths.out_dir);
        opt(p, "cache_dir", c.paths.cache_dir);
    }
    if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
    if (j.contains("labeling")) {
        const auto& l = j.at("labeling");
        require_keys(l, {"diag_psi", "max_iters", "tol"}, "labeling");
        opt(l, "diag_psi", c.labeling.diag_psi);
        opt(l, "max_iters", c.labeling.max_iters);
        opt(l, "tol", c.labeling.tol);
    }
    if (j.contains("window")) c.window = window_from_config(j.at("window"));
    opt(j, "target_mm", c.target_mm);
    if (j.contains("arch")) {
        const auto& a = j.at("arch");
        require_keys(a, {"depthwise", "rank", "clin_dim", "fused_dim"}, "arch");
        opt(a, "depthwise", c.arch.depthwise);
        opt(a, "rank", c.arch.rank);
        opt(a, "clin_dim", c.arch.clin_dim);
        opt(a, "fused_dim", c.arch.fused_dim);
    }
    if (j.contains("pretrain_task")) {
        const auto& t = j.at("pretrain_task");
        require_keys(t, {"n_classes", "n_train", "n_val", "image_size", "noise_sd",
                         "target_accuracy"},
                     "pretrain_task");
        opt(t, "n_classes", c.pretrain_task.n_classes);
        opt(t, "n_train", c.pretrain_task.n_train);
        opt(t, "n_val", c.pretrain_task.n_val);
        opt(t, "image_size", c.pretrain_task.image_size);
        opt(t, "noise_sd", c.pretrain_task.noise_sd);
        opt(t, "target_accuracy", c.pretrain_task.target_accuracy);
    }
    // Source-task defaults: larger steps, shorter run.
    c.pretrain.learning_rate = 1e-3;
    c.pretrain.max_epochs = 40;
    c.pretrain.early_stop_patience = 8;
    c.pretrain.dropout_rate = 0.0;
    c.pretrain.weight_decay = 1e-5;
    if (j.contains("pretrain")) c.pretrain = train_from_json(j.at("pretrain"), "pretrain", c.pretrain);
    if (j.contains("train")) c.train = train_from_json(j.at("train"), "train", c.train);

    if (j.contains("baselines")) {
        const auto& b = j.at("baselines");
        require_keys(b, {"reducers", "k", "models", "n_draws", "inner_folds",
                         "rfe_lambda", "ufs_mutual_info"},
                     "baselines");
        opt(b, "reducers", c.baselines_cfg.reducers);
        opt(b, "k", c.baselines_cfg.k);
        opt(b, "models", c.baselines_cfg.models);
        opt(b, "n_draws", c.baselines_cfg.n_draws);
        opt(b, "inner_folds", c.baselines_cfg.inner_folds);
        opt(b, "rfe_lambda", c.baselines_cfg.reducer_opts.rfe_lambda);
        opt(b, "ufs_mutual_info", c.baselines_cfg.reducer_opts.ufs_mutual_info);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        require_keys(e, {"bootstrap_B", "subsets", "threshold", "neural_only_mode",
                         "plots"},
                     "eval");
        opt(e, "bootstrap_B", c.eval_cfg.bootstrap_B);
        opt(e, "subsets", c.eval_cfg.subsets);
        opt(e, "threshold", c.eval_cfg.threshold);
        opt(e, "neural_only_mode", c.eval_cfg.neural_only_mode);
        opt(e, "plots", c.eval_cfg.plots);
    }
    if (j.contains("sensitivity")) {
        const auto& s = j.at("sensitivity");
        require_keys(s, {"windows", "counts"}, "sensitivity");
        opt(s, "windows", c.sensitivity_cfg.windows);
        opt(s, "counts", c.sensitivity_cfg.counts);
    }

    // Seeds flow from the master seed unless the spec carries its own.
    if (c.synth) c.synth->seed = c.seed;
    c.pretrain_task.seed = c.seed;
    c.pretrain.seed = c.seed;
    c.train.seed = c.seed;
    c.validate();
    return c;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return parse_config(j);
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &config;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot - pos);
        if (key.empty()) throw ConfigError("bad override path: " + path);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

}  // namespace cipred::pipeline

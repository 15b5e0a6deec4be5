#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cipred/core/errors.hpp"
#include "cipred/core/threading.hpp"
#include "cipred/kernels/kernels.hpp"
#include "cipred/pipeline/commands.hpp"
#include "cipred/pipeline/config.hpp"

namespace {

using cipred::pipeline::PipelineConfig;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct GlobalFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
    int threads = 0;
    std::string out_dir;
    bool dry_run = false;
};

PipelineConfig resolve_config(const GlobalFlags& flags) {
    std::ifstream in(flags.config_path);
    if (!in) throw cipred::ConfigError("cannot open config file: " + flags.config_path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw cipred::ConfigError("config file is not valid JSON: " + flags.config_path);
    for (const auto& o : flags.overrides) cipred::pipeline::apply_override(j, o);
    if (flags.seed >= 0) j["seed"] = static_cast<std::uint64_t>(flags.seed);
    if (!flags.out_dir.empty()) j["paths"]["out_dir"] = flags.out_dir;
    if (flags.threads > 0) j["threads"] = flags.threads;
    PipelineConfig cfg = cipred::pipeline::parse_config(j);
    cipred::set_max_threads(cfg.threads);
    return cfg;
}

int dispatch(const std::string& name, const GlobalFlags& flags) {
    static const std::map<std::string, std::function<void(const PipelineConfig&)>> commands = {
        {"generate", cipred::pipeline::cmd_generate},
        {"label", cipred::pipeline::cmd_label},
        {"preprocess", cipred::pipeline::cmd_preprocess},
        {"pretrain", cipred::pipeline::cmd_pretrain},
        {"train", cipred::pipeline::cmd_train},
        {"baselines", cipred::pipeline::cmd_baselines},
        {"evaluate", cipred::pipeline::cmd_evaluate},
        {"sensitivity", cipred::pipeline::cmd_sensitivity},
        {"report", cipred::pipeline::cmd_report},
    };
    try {
        const PipelineConfig cfg = resolve_config(flags);
        if (flags.dry_run) {
            std::printf("config ok\n");
            std::printf("plan: %s\n", name.c_str());
            std::printf("  cohort_dir: %s\n", cfg.paths.cohort_dir.c_str());
            std::printf("  out_dir:    %s\n", cfg.paths.out_dir.c_str());
            std::printf("  seed:       %llu\n",
                        static_cast<unsigned long long>(cfg.seed));
            std::printf("  threads:    %d\n", cipred::max_threads());
            std::printf("  kernels:    %s\n",
                        cipred::kernels::backend_name(cipred::kernels::active_backend())
                            .c_str());
            return kExitOk;
        }
        commands.at(name)(cfg);
        return kExitOk;
    } catch (const cipred::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const cipred::ValidationError& e) {
        std::fprintf(stderr, "data validation error: %s\n", e.what());
        return kExitData;
    } catch (const cipred::FormatError& e) {
        std::fprintf(stderr, "data format error: %s\n", e.what());
        return kExitData;
    } catch (const cipred::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cochlear-implant outcome prediction pipeline"};
    app.require_subcommand(1);

    GlobalFlags flags;
    std::string invoked;
    for (const std::string name : {"generate", "label", "preprocess", "pretrain", "train",
                                   "baselines", "evaluate", "sensitivity", "report"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", flags.config_path, "pipeline config JSON")
            ->required();
        sub->add_option("--seed", flags.seed, "override config seed");
        sub->add_option("--threads", flags.threads, "worker cap");
        sub->add_option("--out", flags.out_dir, "override output directory");
        sub->add_option("--set", flags.overrides,
                        "dotted-path config override, e.g. train.batch_size=16");
        sub->add_flag("--dry-run", flags.dry_run,
                      "validate the config and print the plan only");
        sub->callback([&invoked, name]() { invoked = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }
    return dispatch(invoked, flags);
}

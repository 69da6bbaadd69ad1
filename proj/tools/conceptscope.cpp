#include "conceptscope/pipeline.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"

using namespace conceptscope;

int main(int argc, char ** argv) {
    CLI::App app{"conceptscope: train a toy transformer and analyse its concept representations"};
    app.require_subcommand(1, 1);

    const std::map<std::string, std::pair<std::string, std::function<std::vector<acceptance::Check>(
                                                            const PipelineConfig &, const RunPaths &)>>>
        stages = {
            {"gen", {"generate datasets", run_gen}},
            {"train", {"train (or reuse) the model checkpoint", run_train}},
            {"patch", {"causal mediation analysis and function vectors", run_patch}},
            {"rsa", {"representational similarity analysis and concept vectors", run_rsa}},
            {"intervene", {"steering experiments", run_intervene}},
            {"report", {"render figures and tables", run_report}},
        };

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    for (const auto & [name, entry] : stages) {
        CLI::App * sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "override the root seed");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        PipelineConfig c = load_pipeline_config(config_path);
        if (seed) {
            c.seed = *seed;
        }
        if (workers) {
            c.workers = *workers;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto checks = stages.at(cmd).second(c, RunPaths{out_dir});
        record_stage_seconds(RunPaths{out_dir}, cmd,
                             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return acceptance::all_passed(checks) ? 0 : 1;
    } catch (const std::exception & e) {
        std::cerr << "conceptscope " << cmd << ": " << e.what() << '\n';
        return 2;
    }
}

#pragma once

#include "conceptscope/acceptance.hpp"
#include "conceptscope/model.hpp"
#include "conceptscope/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace conceptscope {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    std::size_t shots = kDefaultShots;
    std::size_t prompts = kDefaultPrompts;
    std::size_t ambiguous_shots = kAmbiguousShots;
    std::size_t ambiguous_prompts = 50;
    std::size_t dev_prompts = 50;
    std::vector<std::size_t> shot_sweep = {1, 2, 3, 4, 5, 10};
    std::size_t letter_string_prompts = 50;
    std::size_t letter_cv_prompts = 20;
};

struct AnalysisConfig {
    std::size_t fv_heads = 10;
    std::size_t cv_heads = 3;
    double fv_scale = 1.0;
    double cv_scale = 10.0;
    int fv_layer = -1; // -1: n_layers / 3
    std::vector<double> sweep_scales = {0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
    std::size_t min_group = 20;
};

struct PipelineConfig {
    std::uint64_t seed = 1234;
    int workers = 1;
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    AnalysisConfig analysis;

    std::uint64_t data_seed() const;
    std::uint64_t train_seed() const;
    std::uint64_t analysis_seed() const;
    int fv_layer() const { return analysis.fv_layer >= 0 ? analysis.fv_layer : model.n_layers / 3; }
};

nlohmann::json to_json(const PipelineConfig & c);
PipelineConfig pipeline_config_from_json(const nlohmann::json & j);
PipelineConfig load_pipeline_config(const std::string & path);

// Output layout under --out.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path checkpoint() const { return root / "model.ckpt"; }
    std::filesystem::path patch() const { return root / "patch"; }
    std::filesystem::path rsa() const { return root / "rsa"; }
    std::filesystem::path intervene() const { return root / "intervene"; }
    std::filesystem::path report() const { return root / "report"; }
    std::filesystem::path dataset(const std::string & name) const { return data() / (name + ".jsonl"); }
    std::filesystem::path dataset(const std::string & name, std::size_t shots) const;
};

// Each stage writes its artifacts, then returns the acceptance checks it owns
// (also written to <stage>_checks.json).
std::vector<acceptance::Check> run_gen(const PipelineConfig & c, const RunPaths & out);
std::vector<acceptance::Check> run_train(const PipelineConfig & c, const RunPaths & out);
std::vector<acceptance::Check> run_patch(const PipelineConfig & c, const RunPaths & out);
std::vector<acceptance::Check> run_rsa(const PipelineConfig & c, const RunPaths & out);
std::vector<acceptance::Check> run_intervene(const PipelineConfig & c, const RunPaths & out);
std::vector<acceptance::Check> run_report(const PipelineConfig & c, const RunPaths & out);

// Wall-clock seconds per stage, merged into <out>/timings.json by the CLI.
void record_stage_seconds(const RunPaths & out, const std::string & stage, double seconds);
// Total recorded pipeline time. A reused checkpoint counts at its original
// training time. Returns nullopt until every stage has been recorded.
std::optional<double> pipeline_minutes(const RunPaths & out);

// Generator checks on freshly generated data (abstract oracle, canonical
// alphabet, MC position uniformity).
std::vector<acceptance::Check> generator_checks(std::uint64_t seed);

// Decomposition, self-patch and zero-scale injection identities on a model.
std::vector<acceptance::Check> identity_checks(const Transformer & model, const Vocabulary & vocab,
                                               const std::vector<PromptInstance> & prompts);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

// Reads a stage's JSON artifact, naming the producing command when missing.
nlohmann::json read_stage_json(const std::filesystem::path & path, const std::string & producer);

} // namespace conceptscope

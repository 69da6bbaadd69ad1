#pragma once

#include "conceptscope/checkpoint.hpp"
#include "conceptscope/model.hpp"
#include "conceptscope/tasks.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace conceptscope {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Relative sampling weights of the training task families.
struct TaskMixture {
    double verbal_open = 0.45;
    double verbal_mc = 0.2;
    double list = 0.1;
    double abstract = 0.15;
    double letter_string = 0.1;
};

struct TrainConfig {
    int steps = 6000;
    int batch_size = 32;
    double lr = 1e-3;
    double min_lr_ratio = 0.1;
    int warmup = 200;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;
    std::size_t min_shots = 1;
    std::size_t max_shots = 10;
    int log_every = 50;
    double overlap_weight = 2.0; // query oversampling for context-dependent inputs
    TaskMixture mixture;
};

nlohmann::json to_json(const TrainConfig & c);
TrainConfig train_config_from_json(const nlohmann::json & j);

// Linear warmup then cosine decay to lr * min_lr_ratio at the final step.
double lr_at(const TrainConfig & c, int step);

// Appends one prompt as a training sequence with a label at every answer slot
// (the token after each "->" or "A:").
void append_example(const PromptInstance & p, PromptFormat format, const Vocabulary & vocab, TrainBatch & batch);

// Draws one prompt from the training mixture (train split only).
PromptInstance sample_training_prompt(const World & world, const TrainConfig & c, Rng & rng);

TrainBatch sample_batch(const World & world, const Vocabulary & vocab, const TrainConfig & c, Rng & rng);

class AdamW {
public:
    AdamW(const ParamSet & params, const TrainConfig & c);
    // One update with the given learning rate; skips frozen tensors.
    void step(ParamSet & params, const ParamSet & grads, double lr);

private:
    TrainConfig c_;
    ParamSet m_;
    ParamSet v_;
    int t_ = 0;
};

// L2 norm over trainable tensors.
double grad_norm(const ParamSet & grads);

struct TrainLogRow {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::vector<std::pair<std::string, double>> eval; // optional accuracies, filled by the callback
};

// Called at every log step with the model in its current state; may attach
// eval columns to the row before it is stored.
using TrainCallback = std::function<void(TrainLogRow &)>;

// Deterministic given (model init, config, rng seed). Throws TrainingError on a
// non-finite loss.
std::vector<TrainLogRow> train(Transformer & model, const World & world, const Vocabulary & vocab,
                               const TrainConfig & c, std::uint64_t seed, const TrainCallback & on_log = {});

void write_loss_csv(const std::string & path, const std::vector<TrainLogRow> & rows);

// Fraction of prompts whose greedy next token equals the target.
double evaluate_accuracy(const Transformer & model, const Vocabulary & vocab,
                         const std::vector<PromptInstance> & prompts);

struct LoadedModel {
    World world;
    Vocabulary vocab;
    Transformer model;
};

// Loads a checkpoint and rebuilds its world and vocabulary.
LoadedModel load_model(const std::string & path);
void save_model(const std::string & path, const Transformer & model, const Vocabulary & vocab,
                const nlohmann::json & extra = nlohmann::json::object());

} // namespace conceptscope

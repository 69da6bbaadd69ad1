#pragma once

#include "conceptscope/model.hpp"
#include "conceptscope/tasks.hpp"

#include <string>
#include <vector>

#include "json.hpp"

namespace conceptscope {

inline const std::vector<double> & default_sweep_scales() {
    static const std::vector<double> v = {0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
    return v;
}

// Fraction of prompts whose greedy next token equals alt_targets[alt_index]
// (or the target when alt_index is npos) under the given injections.
double continuation_rate(const Transformer & model, const Vocabulary & vocab,
                         const std::vector<PromptInstance> & prompts, const std::vector<Injection> & injections,
                         std::size_t alt_index, int workers = 1);

struct SteerResult {
    double baseline = 0.0;
    double steered = 0.0;
    double delta() const { return steered - baseline; }
};

// Rate of the primary-concept continuation on ambiguous prompts with and
// without injecting `vector` at `layer` with `scale`.
SteerResult steer_eval(const Transformer & model, const Vocabulary & vocab,
                       const std::vector<PromptInstance> & ambiguous, const Vec & vector, int layer, double scale,
                       int workers = 1);

// Same prompts with every exemplar removed, rendered.
std::vector<PromptInstance> zero_shot(const std::vector<PromptInstance> & prompts, const Vocabulary & vocab);

// Accuracy on zero-shot prompts with the vector injected.
SteerResult zero_shot_eval(const Transformer & model, const Vocabulary & vocab,
                           const std::vector<PromptInstance> & zero_shot_prompts, const Vec & vector, int layer,
                           double scale, int workers = 1);

struct SweepCell {
    int layer = 0;
    double scale = 0.0;
    double value = 0.0;
};

// Steered continuation rate over every (layer, scale) pair.
std::vector<SweepCell> sweep_layer_scale(const Transformer & model, const Vocabulary & vocab,
                                         const std::vector<PromptInstance> & ambiguous, const Vec & vector,
                                         const std::vector<double> & scales, int workers = 1);

// Layer with the highest value at the given scale; ties go to the lower layer.
int best_layer(const std::vector<SweepCell> & grid, double scale);

// Highest value; ties go to the lower layer, then the lower scale.
SweepCell best_cell(const std::vector<SweepCell> & grid);

void write_sweep_csv(const std::string & path, const std::vector<SweepCell> & grid, double baseline);

} // namespace conceptscope

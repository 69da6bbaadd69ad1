#include "conceptscope/interventions.hpp"

#include "conceptscope/parallel.hpp"

#include <fstream>
#include <limits>

namespace conceptscope {

double continuation_rate(const Transformer & model, const Vocabulary & vocab,
                         const std::vector<PromptInstance> & prompts, const std::vector<Injection> & injections,
                         std::size_t alt_index, int workers) {
    if (prompts.empty()) {
        throw TaskError("continuation_rate: no prompts");
    }
    HookPlan plan;
    plan.injections = injections;
    std::vector<int> hit(prompts.size(), 0);
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
        const auto & p = prompts[i];
        const std::string & want = alt_index == std::string::npos ? p.target : p.alt_targets.at(alt_index);
        const auto ids = p.rendered.empty() ? render_prompt(p, vocab) : p.rendered;
        hit[i] = greedy_next(model, ids, plan) == vocab.id(want) ? 1 : 0;
    });
    double s = 0.0;
    for (int h : hit) {
        s += h;
    }
    return s / static_cast<double>(prompts.size());
}

SteerResult steer_eval(const Transformer & model, const Vocabulary & vocab,
                       const std::vector<PromptInstance> & ambiguous, const Vec & vector, int layer, double scale,
                       int workers) {
    SteerResult r;
    r.baseline = continuation_rate(model, vocab, ambiguous, {}, 0, workers);
    r.steered = continuation_rate(model, vocab, ambiguous, {{layer, vector, scale}}, 0, workers);
    return r;
}

std::vector<PromptInstance> zero_shot(const std::vector<PromptInstance> & prompts, const Vocabulary & vocab) {
    std::vector<PromptInstance> out = prompts;
    for (auto & p : out) {
        p.exemplars.clear();
        p.preamble.clear();
        p.rendered = render_prompt(p, vocab);
    }
    return out;
}

SteerResult zero_shot_eval(const Transformer & model, const Vocabulary & vocab,
                           const std::vector<PromptInstance> & zero_shot_prompts, const Vec & vector, int layer,
                           double scale, int workers) {
    SteerResult r;
    r.baseline = continuation_rate(model, vocab, zero_shot_prompts, {}, std::string::npos, workers);
    r.steered = continuation_rate(model, vocab, zero_shot_prompts, {{layer, vector, scale}}, std::string::npos, workers);
    return r;
}

std::vector<SweepCell> sweep_layer_scale(const Transformer & model, const Vocabulary & vocab,
                                         const std::vector<PromptInstance> & ambiguous, const Vec & vector,
                                         const std::vector<double> & scales, int workers) {
    std::vector<SweepCell> grid;
    for (int l = 0; l < model.config().n_layers; ++l) {
        for (double s : scales) {
            grid.push_back({l, s, continuation_rate(model, vocab, ambiguous, {{l, vector, s}}, 0, workers)});
        }
    }
    return grid;
}

int best_layer(const std::vector<SweepCell> & grid, double scale) {
    int best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (const auto & c : grid) {
        if (c.scale == scale && (c.value > best_value || (c.value == best_value && c.layer < best))) {
            best = c.layer;
            best_value = c.value;
        }
    }
    if (best < 0) {
        throw TaskError("best_layer: scale not in grid");
    }
    return best;
}

SweepCell best_cell(const std::vector<SweepCell> & grid) {
    if (grid.empty()) {
        throw TaskError("best_cell: empty grid");
    }
    SweepCell best = grid.front();
    for (const auto & c : grid) {
        const bool better = c.value > best.value ||
                            (c.value == best.value && (c.layer < best.layer || (c.layer == best.layer && c.scale < best.scale)));
        if (better) {
            best = c;
        }
    }
    return best;
}

void write_sweep_csv(const std::string & path, const std::vector<SweepCell> & grid, double baseline) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << "layer,scale,rate,baseline\n";
    for (const auto & c : grid) {
        f << c.layer << ',' << c.scale << ',' << c.value << ',' << baseline << '\n';
    }
}

} // namespace conceptscope

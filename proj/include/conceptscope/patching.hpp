#pragma once

#include "conceptscope/model.hpp"
#include "conceptscope/tasks.hpp"

#include <map>
#include <string>
#include <vector>

namespace conceptscope {

using HeadVectors = std::map<HeadId, Vec>;
using ScoreTable = std::map<HeadId, double>;

// Mean output of every head at the last position over the given prompts.
HeadVectors mean_head_activations(const Transformer & model, const std::vector<PromptInstance> & prompts,
                                  int workers = 1);

// One corrupted copy per prompt (exemplar inputs replaced by unrelated words),
// rendered.
std::vector<PromptInstance> corrupt_dataset(const std::vector<PromptInstance> & prompts, const World & world,
                                            const Vocabulary & vocab, std::uint64_t seed);

// Causal indirect effect of each head: the mean over corrupted prompts of
// p(target | head patched to its clean mean) - p(target | unpatched).
ScoreTable compute_cie(const Transformer & model, const Vocabulary & vocab,
                       const std::vector<PromptInstance> & corrupted, const HeadVectors & clean_means,
                       int workers = 1);

// Average of per-dataset CIE tables; every table must cover the same heads.
ScoreTable compute_aie(const std::vector<ScoreTable> & per_dataset);

// Highest scores first, ties broken by (layer, head).
std::vector<HeadId> top_heads_by_score(const ScoreTable & scores, std::size_t k);

void write_score_csv(const std::string & path, const ScoreTable & scores);
ScoreTable read_score_csv(const std::string & path);

Vec sum_head_vectors(const HeadVectors & vectors, const std::vector<HeadId> & heads);

// Function vector: summed clean means of the given heads.
inline Vec build_function_vector(const HeadVectors & clean_means, const std::vector<HeadId> & heads) {
    return sum_head_vectors(clean_means, heads);
}

struct SteeringVector {
    std::string kind;   // "function_vector" or "concept_vector"
    std::string source; // dataset the vector was extracted from
    std::vector<HeadId> heads;
    int layer = 0;      // default injection layer
    double scale = 1.0; // default injection scale
    Vec vector;
};

// `path` receives the raw vector ("CSSV", u32 version, u32 dim, f64 payload);
// `path`.json receives the metadata.
void save_steering_vector(const std::string & path, const SteeringVector & sv);
SteeringVector load_steering_vector(const std::string & path);

void write_head_vectors(const std::string & path, const HeadVectors & vectors);
HeadVectors read_head_vectors(const std::string & path);

} // namespace conceptscope

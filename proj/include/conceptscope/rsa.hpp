#pragma once

#include "conceptscope/model.hpp"
#include "conceptscope/patching.hpp"
#include "conceptscope/tasks.hpp"

#include <map>
#include <string>
#include <vector>

namespace conceptscope {

// Last-position output of every head on every prompt: outputs[head][prompt].
using HeadOutputs = std::map<HeadId, std::vector<Vec>>;

HeadOutputs collect_head_outputs(const Transformer & model, const std::vector<PromptInstance> & prompts,
                                 int workers = 1);

// Cosine similarity between every pair of vectors.
Matrix build_rsm(const std::vector<Vec> & vectors);

// 1 where two prompts share the attribute value, 0 otherwise.
Matrix build_design_matrix(const std::vector<TaskAttributes> & attributes, Attribute a);

// Spearman correlation between the strict lower triangles of an RSM and a
// design matrix. Throws NumericsError if either triangle is constant.
double compute_phi(const Matrix & rsm, const Matrix & design);

struct PhiTable {
    std::vector<Attribute> attributes;
    // NaN where the design matrix is constant over the prompt set.
    std::map<HeadId, std::map<Attribute, double>> values;

    double at(const HeadId & h, Attribute a) const { return values.at(h).at(a); }
};

PhiTable phi_table(const HeadOutputs & outputs, const std::vector<TaskAttributes> & attributes,
                   const std::vector<Attribute> & axes, int workers = 1);

// Restricts every head's outputs to the given prompt indices.
HeadOutputs select_prompts(const HeadOutputs & outputs, const std::vector<std::size_t> & indices);

void write_phi_csv(const std::string & path, const PhiTable & table);
PhiTable read_phi_csv(const std::string & path);

// Highest finite Φ for the attribute first, ties by (layer, head).
std::vector<HeadId> top_heads_by_phi(const PhiTable & table, Attribute a, std::size_t k);

// Per-prompt sum of the given heads' outputs.
std::vector<Vec> per_prompt_vectors(const HeadOutputs & outputs, const std::vector<HeadId> & heads);

// Concept vector: summed mean outputs of the top-Φ concept heads over the
// prompts of one dataset.
Vec build_concept_vector(const HeadVectors & dataset_means, const std::vector<HeadId> & concept_heads);

} // namespace conceptscope

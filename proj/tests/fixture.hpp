#pragma once

#include "conceptscope/model.hpp"
#include "conceptscope/tasks.hpp"

#include <random>

namespace fixture {

using namespace conceptscope;

inline const World & world() {
    static const World w = build_world(7);
    return w;
}

inline const Vocabulary & vocab() {
    static const Vocabulary v = Vocabulary::build(world());
    return v;
}

// Randomly perturbed tiny model so head outputs differ from prompt to prompt.
inline Transformer tiny_model(std::uint64_t seed = 3, int layers = 2, int heads = 2, int d = 16) {
    ModelConfig c;
    c.n_layers = layers;
    c.n_heads = heads;
    c.d_model = d;
    c.max_context = 256;
    c.seed = seed;
    c.world_seed = world().seed;
    Transformer m = Transformer::initialize(c, vocab());
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto & t : m.params().tensors()) {
        if (Transformer::trainable(t.name)) {
            for (auto & x : t.data) {
                x += static_cast<float>(nd(rng));
            }
        }
    }
    return m;
}

inline std::vector<PromptInstance> prompts(const std::string & dataset, std::size_t n, std::size_t shots = 3,
                                           std::uint64_t seed = 1) {
    return build_dataset(world(), vocab(), dataset, shots, n, seed).prompts;
}

} // namespace fixture

#pragma once

#include "conceptscope/numerics.hpp"
#include "conceptscope/tensor.hpp"
#include "conceptscope/vocab.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace conceptscope {

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
    int n_layers = 8;
    int n_heads = 8;
    int d_model = 256;
    int vocab_size = 0;
    int max_context = 512;
    std::uint64_t seed = 0;       // weight initialization
    std::uint64_t world_seed = 0; // vocabulary / structured embedding
    double rope_base = 10000.0;

    int d_head() const { return d_model / n_heads; }
    int d_mlp() const { return 4 * d_model; }
    int n_heads_total() const { return n_layers * n_heads; }
    void validate() const;

    friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

nlohmann::json to_json(const ModelConfig & c);
ModelConfig model_config_from_json(const nlohmann::json & j);

struct HeadId {
    int layer = 0;
    int head = 0;

    auto operator<=>(const HeadId &) const = default;
};

std::string to_string(const HeadId & h);

// Every (layer, head) pair in (layer, head) order.
std::vector<HeadId> all_heads(const ModelConfig & c);

// A head's additive contribution to the residual stream at the last position.
struct HeadActivation {
    HeadId head;
    Vec vector;
};

struct Injection {
    int layer = 0; // added to the residual after this layer completes
    Vec vector;
    double scale = 1.0;
};

// Hooks act on the last token position only.
struct HookPlan {
    std::set<HeadId> captures;
    bool capture_all = false;
    std::map<HeadId, Vec> patches;
    std::vector<Injection> injections;

    bool empty() const { return captures.empty() && !capture_all && patches.empty() && injections.empty(); }
};

struct ForwardResult {
    std::vector<float> logits;                  // vocab-sized, last position
    std::map<HeadId, HeadActivation> captured;
    // residual[0] is the last token's embedding, residual[l + 1] the residual
    // after layer l (including any injection at l).
    std::vector<Vec> residual;
    std::vector<Vec> mlp_out; // per layer, last position
};

// Keys/values of every layer for all positions but the last.
struct PrefixCache {
    std::vector<TokenId> ids;
    std::vector<FloatBuffer> keys;   // per layer, ids.size() x d_model, rotary applied
    std::vector<FloatBuffer> values; // per layer, ids.size() x d_model
};

// Training batch: packed sequences with (position, target) pairs; the logits
// at `position` are trained to predict `target`.
struct TrainBatch {
    std::vector<std::vector<TokenId>> sequences;
    std::vector<std::vector<std::pair<int, TokenId>>> labels;

    std::size_t n_labels() const;
    std::size_t n_tokens() const;
};

// Decoder-only pre-norm transformer. For each layer at every position
//   mid = h + sum_j head_j(rms(h))      out = mid + mlp(rms(mid))
// so h_l = h_{l-1} + sum_j a_lj + MLP_l holds exactly. The token embedding is a
// fixed structured table (see build_structured_embedding) tied to the output.
class Transformer {
public:
    Transformer() = default;
    Transformer(ModelConfig config, ParamSet params);

    // Fresh weights with the given vocabulary's structured embedding.
    static Transformer initialize(const ModelConfig & config, const Vocabulary & vocab);

    const ModelConfig & config() const { return config_; }
    const ParamSet & params() const { return params_; }
    ParamSet & params() { return params_; }

    // Names of tensors updated by training (everything but the embedding).
    static bool trainable(const std::string & tensor_name);

    PrefixCache prefill(std::span<const TokenId> prefix) const;
    ForwardResult decode_last(const PrefixCache & cache, TokenId last, const HookPlan & plan) const;

    // prefill(ids[0..n-1)) + decode_last(ids[n-1]).
    ForwardResult forward(std::span<const TokenId> ids, const HookPlan & plan = {}) const;

    // Logits for every position (T x vocab, row-major) via the batched path.
    std::vector<float> sequence_logits(std::span<const TokenId> ids) const;

    // Mean cross-entropy over all labels; accumulates gradients into `grads`
    // (same layout as params) when non-null.
    double loss_and_grad(const TrainBatch & batch, ParamSet * grads) const;

private:
    struct Impl;

    ModelConfig config_;
    ParamSet params_;
};

double next_token_prob(const Transformer & model, std::span<const TokenId> ids, const HookPlan & plan,
                       TokenId target);
TokenId greedy_next(const Transformer & model, std::span<const TokenId> ids, const HookPlan & plan = {});

std::vector<double> softmax(std::span<const float> logits);
// Argmax with ties broken by the lowest id.
TokenId argmax(std::span<const float> logits);

// Fixed token embedding built from latent word features: lexical tokens are
// sums of random unit-norm codes for kind, language, stem, category and
// polarity; other tokens get a kind code plus a unique code. Rows are scaled
// to roughly unit norm.
FloatBuffer build_structured_embedding(const Vocabulary & vocab, int d_model, std::uint64_t seed);

} // namespace conceptscope

#include "conceptscope/model.hpp"
#include "conceptscope/tasks.hpp"

#include "doctest.h"

#include <cmath>

using namespace conceptscope;

namespace {

struct Fixture {
    World world = build_world(7);
    Vocabulary vocab = Vocabulary::build(world);

    Transformer tiny(std::uint64_t seed = 3) const {
        ModelConfig c;
        c.n_layers = 2;
        c.n_heads = 2;
        c.d_model = 16;
        c.max_context = 64;
        c.seed = seed;
        c.world_seed = world.seed;
        Transformer m = Transformer::initialize(c, vocab);
        // Larger weights than the default init so gradients are not tiny.
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

    std::vector<TokenId> ids(const std::string & text) const { return vocab.tokenize(text); }
};

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return m;
}

} // namespace

TEST_CASE("config validation rejects bad shapes") {
    ModelConfig c;
    c.vocab_size = 10;
    c.d_model = 30;
    c.n_heads = 4;
    CHECK_THROWS_AS(c.validate(), ModelError);
    c.d_model = 24;
    c.n_heads = 8; // d_head 3 is odd
    CHECK_THROWS_AS(c.validate(), ModelError);
    c.n_heads = 4;
    CHECK_NOTHROW(c.validate());
    CHECK(model_config_from_json(to_json(c)) == c);
}

TEST_CASE("structured embedding shares codes between related words") {
    Fixture f;
    const int d = 256;
    const auto e = build_structured_embedding(f.vocab, d, f.world.seed);
    const auto row = [&](const std::string & w) {
        const TokenId id = f.vocab.id(w);
        return Vec::from_floats(std::span<const float>(e).subspan(static_cast<std::size_t>(id) * d, d));
    };
    // Antonyms share kind, language, stem and category: 4 of 5 codes.
    CHECK(cosine(row("big"), row("small")) > 0.6);
    CHECK(std::abs(cosine(row("Q:"), row("->")) - 0.5) < 0.3);
    const auto & ant = f.world.lexicon("antonym_en");
    const auto & other = f.world.lexicon("categorical_en");
    CHECK(cosine(row(ant.entries.front().input), row(other.entries.back().input)) < 0.7);
}

TEST_CASE("cached last-token path matches the batched path") {
    Fixture f;
    const Transformer m = f.tiny();
    const auto ids = f.ids("big -> small : hot -> cold : fast ->");
    const auto all = m.sequence_logits(ids);
    const auto last = m.forward(ids).logits;
    const auto V = static_cast<std::size_t>(m.config().vocab_size);
    const std::span<const float> batched(all.data() + (ids.size() - 1) * V, V);
    CHECK(max_abs_diff(batched, last) < 1e-4);
}

TEST_CASE("causal masking: later tokens do not change earlier logits") {
    Fixture f;
    const Transformer m = f.tiny();
    const auto a = f.ids("big -> small : hot -> cold");
    auto b = a;
    b.back() = f.vocab.id("fast");
    const auto la = m.sequence_logits(a);
    const auto lb = m.sequence_logits(b);
    const auto V = static_cast<std::size_t>(m.config().vocab_size);
    const std::size_t prefix = (a.size() - 1) * V;
    CHECK(max_abs_diff(std::span<const float>(la.data(), prefix), std::span<const float>(lb.data(), prefix)) == 0.0);
    CHECK(max_abs_diff(std::span<const float>(la.data() + prefix, V), std::span<const float>(lb.data() + prefix, V)) >
          0.0);
}

TEST_CASE("residual stream decomposes into embedding, heads and MLPs") {
    Fixture f;
    const Transformer m = f.tiny();
    HookPlan plan;
    plan.capture_all = true;
    const auto res = m.forward(f.ids("Q: big A: small \n Q: hot A:"), plan);
    REQUIRE(res.residual.size() == static_cast<std::size_t>(m.config().n_layers + 1));
    Vec sum = res.residual.front();
    for (int l = 0; l < m.config().n_layers; ++l) {
        for (int h = 0; h < m.config().n_heads; ++h) {
            sum += res.captured.at({l, h}).vector;
        }
        sum += res.mlp_out[static_cast<std::size_t>(l)];
    }
    const Vec & final = res.residual.back();
    Vec diff = sum + (-1.0) * final;
    CHECK(norm(diff) / norm(final) < 1e-5);
}

TEST_CASE("self-patching and zero-scale injection leave the output unchanged") {
    Fixture f;
    const Transformer m = f.tiny();
    const auto ids = f.ids("big -> small : hot ->");
    HookPlan cap;
    cap.capture_all = true;
    const auto base = m.forward(ids, cap);
    HookPlan patch;
    for (const auto & [id, act] : base.captured) {
        patch.patches.emplace(id, act.vector);
    }
    const auto patched = m.forward(ids, patch);
    const auto pb = softmax(base.logits);
    const auto pp = softmax(patched.logits);
    for (std::size_t i = 0; i < pb.size(); ++i) {
        CHECK(std::abs(pb[i] - pp[i]) < 1e-6);
    }
    HookPlan inj;
    inj.injections.push_back({1, Vec(static_cast<std::size_t>(m.config().d_model), 3.0), 0.0});
    CHECK(m.forward(ids, inj).logits == m.forward(ids).logits);
}

TEST_CASE("malformed hook plans are rejected") {
    Fixture f;
    const Transformer m = f.tiny();
    const auto ids = f.ids("big -> small : hot ->");
    HookPlan bad_layer;
    bad_layer.patches.emplace(HeadId{5, 0}, Vec(16));
    CHECK_THROWS_AS(m.forward(ids, bad_layer), ModelError);
    HookPlan bad_dim;
    bad_dim.injections.push_back({0, Vec(3), 1.0});
    CHECK_THROWS_AS(m.forward(ids, bad_dim), ModelError);
    std::vector<TokenId> too_long(100, ids.front());
    CHECK_THROWS_AS(m.forward(too_long), ModelError);
}

TEST_CASE("analytic gradients match central finite differences") {
    Fixture f;
    Transformer m = f.tiny(11);
    TrainBatch batch;
    batch.sequences = {f.ids("big -> small : hot -> cold"), f.ids("Q: fast A: slow \n Q: open A:")};
    batch.labels = {{{2, f.vocab.id("small")}, {5, f.vocab.id("cold")}}, {{2, f.vocab.id("slow")}}};
    ParamSet grads = m.params().zeros_like();
    m.loss_and_grad(batch, &grads);

    Rng rng(5);
    int checked = 0;
    double worst = 0.0;
    for (std::size_t ti = 0; ti < m.params().tensors().size(); ++ti) {
        auto & t = m.params().tensors()[ti];
        if (!Transformer::trainable(t.name)) {
            continue;
        }
        for (int k = 0; k < 4; ++k) {
            const std::size_t i = uniform_index(rng, t.data.size());
            const float orig = t.data[i];
            const float eps = 1e-2f;
            t.data[i] = orig + eps;
            const double up = m.loss_and_grad(batch, nullptr);
            t.data[i] = orig - eps;
            const double down = m.loss_and_grad(batch, nullptr);
            t.data[i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = grads.tensors()[ti].data[i];
            const double err = std::abs(numeric - analytic) / std::max(1e-2, std::abs(numeric) + std::abs(analytic));
            worst = std::max(worst, err);
            ++checked;
        }
    }
    CHECK(checked > 40);
    CHECK(worst < 2e-2);
}

TEST_CASE("embedding receives no gradient") {
    CHECK_FALSE(Transformer::trainable("tok_embedding"));
    CHECK(Transformer::trainable("layers.0.wqkv"));
}

TEST_CASE("argmax breaks ties by lowest id") {
    const std::vector<float> l{0.5f, 2.0f, 2.0f, -1.0f};
    CHECK(argmax(l) == 1);
    const auto p = softmax(l);
    double s = 0.0;
    for (double x : p) {
        s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
}

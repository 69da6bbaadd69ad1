#include "conceptscope/interventions.hpp"

#include "doctest.h"
#include "fixture.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace conceptscope;

namespace {

std::vector<PromptInstance> ambiguous(std::size_t n) {
    auto ps = gen_ambiguous_icl(fixture::world().lexicon("antonym_en"), fixture::world().lexicon("translation_en_fr"),
                                4, n, Split::Test, 2);
    attach_rendering(ps, fixture::vocab());
    return ps;
}

} // namespace

TEST_CASE("zero-scale steering reproduces the baseline") {
    const Transformer m = fixture::tiny_model();
    const auto ps = ambiguous(10);
    const Vec v(16, 3.0);
    const SteerResult r = steer_eval(m, fixture::vocab(), ps, v, 1, 0.0);
    CHECK(r.steered == r.baseline);
    CHECK(r.delta() == 0.0);
}

TEST_CASE("opposite injections cancel") {
    const Transformer m = fixture::tiny_model();
    const auto ids = ambiguous(1).front().rendered;
    Rng rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> raw(16);
    for (auto & x : raw) {
        x = nd(rng);
    }
    const Vec v(raw);
    HookPlan plan;
    plan.injections.push_back({0, v, 2.0});
    plan.injections.push_back({0, v, -2.0});
    const auto base = m.forward(ids).logits;
    const auto both = m.forward(ids, plan).logits;
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(std::abs(both[i] - base[i]) < 1e-6);
    }
    HookPlan one;
    one.injections.push_back({0, v, 2.0});
    CHECK(m.forward(ids, one).logits != base);
}

TEST_CASE("zero-shot prompts drop exemplars and preamble") {
    auto ps = fixture::prompts("antonym_en", 3, 5);
    const auto zs = zero_shot(ps, fixture::vocab());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        CHECK(zs[i].exemplars.empty());
        CHECK(zs[i].preamble.empty());
        CHECK(zs[i].query == ps[i].query);
        CHECK(zs[i].rendered == render_prompt(zs[i], fixture::vocab()));
        CHECK(zs[i].rendered.size() < ps[i].rendered.size());
    }
}

TEST_CASE("sweep covers every layer and scale; ties pick the lower layer and scale") {
    const Transformer m = fixture::tiny_model();
    const auto ps = ambiguous(4);
    const auto grid = sweep_layer_scale(m, fixture::vocab(), ps, Vec(16, 1.0), {1.0, 10.0});
    CHECK(grid.size() == 4);
    const std::vector<SweepCell> g = {{0, 1.0, 0.2}, {1, 1.0, 0.5}, {2, 1.0, 0.5}, {0, 10.0, 0.5}, {1, 10.0, 0.1}};
    CHECK(best_layer(g, 1.0) == 1);
    CHECK(best_layer(g, 10.0) == 0);
    const SweepCell b = best_cell(g);
    CHECK(b.layer == 0);
    CHECK(b.scale == 10.0);
    CHECK_THROWS(best_layer(g, 3.0));

    const auto path = std::filesystem::temp_directory_path() / "conceptscope_sweep.csv";
    write_sweep_csv(path.string(), g, 0.25);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "layer,scale,rate,baseline");
    std::filesystem::remove(path);
}

TEST_CASE("continuation rate counts the requested continuation") {
    const Transformer m = fixture::tiny_model();
    const auto ps = ambiguous(8);
    const double a = continuation_rate(m, fixture::vocab(), ps, {}, 0);
    const double b = continuation_rate(m, fixture::vocab(), ps, {}, 1);
    CHECK(a >= 0.0);
    CHECK(a + b <= 1.0);
    CHECK(continuation_rate(m, fixture::vocab(), ps, {}, 0, 3) == a);
}

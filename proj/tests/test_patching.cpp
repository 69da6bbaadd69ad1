#include "conceptscope/patching.hpp"
#include "conceptscope/rsa.hpp"

#include "doctest.h"
#include "fixture.hpp"

#include <cmath>
#include <filesystem>

using namespace conceptscope;
namespace fs = std::filesystem;

TEST_CASE("mean activations equal the two-pass mean of per-prompt outputs") {
    const Transformer m = fixture::tiny_model();
    const auto ps = fixture::prompts("antonym_en", 12);
    const HeadVectors means = mean_head_activations(m, ps, 3);
    const HeadOutputs outputs = collect_head_outputs(m, ps, 1);
    REQUIRE(means.size() == 4);
    for (const auto & [h, vs] : outputs) {
        const Vec ref = mean_vector(vs);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(std::abs(means.at(h)[i] - ref[i]) < 1e-10);
        }
    }
    const HeadVectors single = mean_head_activations(m, {ps[0]});
    for (const auto & [h, vs] : outputs) {
        CHECK(single.at(h) == vs[0]);
    }
    CHECK_THROWS(mean_head_activations(m, {}));
}

TEST_CASE("CIE is zero when clean and corrupted prompts coincide") {
    const Transformer m = fixture::tiny_model();
    const auto ps = fixture::prompts("categorical_en", 1);
    const HeadVectors means = mean_head_activations(m, ps);
    // Patching a head to its own value on the same prompt changes nothing.
    for (const auto & [h, v] : compute_cie(m, fixture::vocab(), ps, means)) {
        CHECK(std::abs(v) < 1e-6);
    }
}

TEST_CASE("CIE responds to corruption and is worker-count invariant") {
    const Transformer m = fixture::tiny_model(9);
    const auto clean = fixture::prompts("antonym_en", 6);
    const auto corrupted = corrupt_dataset(clean, fixture::world(), fixture::vocab(), 4);
    const HeadVectors means = mean_head_activations(m, clean);
    const ScoreTable a = compute_cie(m, fixture::vocab(), corrupted, means, 1);
    const ScoreTable b = compute_cie(m, fixture::vocab(), corrupted, means, 3);
    CHECK(a == b);
    double total = 0.0;
    for (const auto & [h, v] : a) {
        total += std::abs(v);
    }
    CHECK(total > 0.0);
}

TEST_CASE("AIE averages datasets and reduces to CIE for one dataset") {
    const ScoreTable x = {{{0, 0}, 0.2}, {{0, 1}, -0.1}};
    const ScoreTable y = {{{0, 0}, 0.4}, {{0, 1}, 0.3}};
    CHECK(compute_aie({x}) == x);
    const ScoreTable avg = compute_aie({x, y});
    CHECK(avg.at({0, 0}) == doctest::Approx(0.3));
    CHECK(avg.at({0, 1}) == doctest::Approx(0.1));
    CHECK_THROWS(compute_aie({}));
    CHECK_THROWS(compute_aie({x, {{{0, 0}, 1.0}}}));
}

TEST_CASE("top heads break ties by layer then head") {
    const ScoreTable s = {{{1, 0}, 0.5}, {{0, 1}, 0.5}, {{0, 0}, 0.1}, {{2, 3}, 0.9}};
    const auto top = top_heads_by_score(s, 3);
    CHECK(top == std::vector<HeadId>{{2, 3}, {0, 1}, {1, 0}});
    CHECK(top_heads_by_score(s, 10).size() == 4);
}

TEST_CASE("function vectors sum the selected head means") {
    const HeadVectors hv = {{{0, 0}, Vec{1.0, 2.0}}, {{0, 1}, Vec{3.0, -1.0}}, {{1, 0}, Vec{5.0, 5.0}}};
    CHECK(build_function_vector(hv, {{0, 0}, {1, 0}}) == Vec{6.0, 7.0});
    CHECK_THROWS(build_function_vector(hv, {{4, 4}}));
}

TEST_CASE("artifact round trips") {
    const fs::path dir = fs::temp_directory_path() / "conceptscope_patching_io";
    fs::create_directories(dir);
    SteeringVector sv{"function_vector", "antonym_en", {{0, 1}, {1, 0}}, 1, 2.5, Vec{0.1, -0.25, 1e-300}};
    save_steering_vector((dir / "fv.bin").string(), sv);
    const SteeringVector back = load_steering_vector((dir / "fv.bin").string());
    CHECK(back.kind == sv.kind);
    CHECK(back.source == sv.source);
    CHECK(back.heads == sv.heads);
    CHECK(back.layer == 1);
    CHECK(back.scale == 2.5);
    CHECK(back.vector == sv.vector);

    const ScoreTable s = {{{0, 0}, 0.1 / 3.0}, {{0, 1}, -2e-17}};
    write_score_csv((dir / "s.csv").string(), s);
    CHECK(read_score_csv((dir / "s.csv").string()) == s);

    const HeadVectors hv = {{{0, 0}, Vec{1.0 / 3.0, 2.0}}};
    write_head_vectors((dir / "hv.json").string(), hv);
    CHECK(read_head_vectors((dir / "hv.json").string()) == hv);
    CHECK_THROWS(load_steering_vector((dir / "missing.bin").string()));
    fs::remove_all(dir);
}

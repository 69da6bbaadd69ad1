#include "conceptscope/rsa.hpp"

#include "doctest.h"
#include "fixture.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>

using namespace conceptscope;

namespace {

std::vector<Vec> random_vectors(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto & x : v) {
            x = nd(rng);
        }
        out.emplace_back(std::move(v));
    }
    return out;
}

std::vector<TaskAttributes> mixed_attributes(std::size_t n) {
    std::vector<TaskAttributes> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].concept_kind = static_cast<Concept>(i % 3);
        out[i].language = static_cast<Language>(i % 2);
    }
    return out;
}

Matrix map_entries(const Matrix & m, double (*f)(double)) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(r, c) = f(m(r, c));
        }
    }
    return out;
}

} // namespace

TEST_CASE("RSM entries match the cosine oracle") {
    const auto vs = random_vectors(25, 12, 1);
    const Matrix rsm = build_rsm(vs);
    REQUIRE(rsm.rows() == 25);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(rsm(i, i) == 1.0);
        for (std::size_t j = 0; j < 25; ++j) {
            CHECK(std::abs(rsm(i, j) - oracle::cosine(vs[i].raw(), vs[j].raw())) < 1e-12);
            CHECK(rsm(i, j) == rsm(j, i));
        }
    }
    CHECK_THROWS(build_rsm({Vec{1.0, 0.0}, Vec{0.0, 0.0}}));
}

TEST_CASE("design matrices mark shared attribute values") {
    const auto attrs = mixed_attributes(6);
    const Matrix d = build_design_matrix(attrs, Attribute::Concept);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(d(i, j) == (i % 3 == j % 3 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("phi is invariant to monotone transforms and prompt reordering") {
    const auto vs = random_vectors(18, 6, 2);
    const auto attrs = mixed_attributes(18);
    const Matrix rsm = build_rsm(vs);
    const Matrix design = build_design_matrix(attrs, Attribute::Concept);
    const double phi = compute_phi(rsm, design);
    CHECK(compute_phi(map_entries(rsm, [](double x) { return std::exp(4.0 * x); }), design) ==
          doctest::Approx(phi).epsilon(1e-12));

    std::vector<std::size_t> order(18);
    for (std::size_t i = 0; i < 18; ++i) {
        order[i] = (7 * i + 3) % 18;
    }
    std::vector<Vec> vs2;
    std::vector<TaskAttributes> attrs2;
    for (auto i : order) {
        vs2.push_back(vs[i]);
        attrs2.push_back(attrs[i]);
    }
    CHECK(compute_phi(build_rsm(vs2), build_design_matrix(attrs2, Attribute::Concept)) ==
          doctest::Approx(phi).epsilon(1e-12));

    const Matrix complement = map_entries(design, [](double x) { return 1.0 - x; });
    CHECK(compute_phi(rsm, complement) == doctest::Approx(-phi).epsilon(1e-12));
}

TEST_CASE("phi is one when similarity follows the attribute exactly") {
    const auto attrs = mixed_attributes(9);
    std::vector<Vec> vs;
    for (const auto & a : attrs) {
        Vec v(3, 0.0);
        v[static_cast<std::size_t>(a.concept_kind)] = 1.0;
        vs.push_back(v);
    }
    CHECK(compute_phi(build_rsm(vs), build_design_matrix(attrs, Attribute::Concept)) == doctest::Approx(1.0));
}

TEST_CASE("phi table marks constant designs as NaN and round-trips through CSV") {
    const Transformer m = fixture::tiny_model();
    auto ps = fixture::prompts("antonym_en", 6);
    const auto more = fixture::prompts("categorical_en", 6);
    ps.insert(ps.end(), more.begin(), more.end());
    std::vector<TaskAttributes> attrs;
    for (const auto & p : ps) {
        attrs.push_back(p.attributes);
    }
    const HeadOutputs outputs = collect_head_outputs(m, ps, 2);
    const PhiTable t = phi_table(outputs, attrs, {Attribute::Concept, Attribute::QuestionType}, 2);
    for (const auto & [h, row] : t.values) {
        CHECK(std::isfinite(row.at(Attribute::Concept)));
        CHECK(std::isnan(row.at(Attribute::QuestionType)));
    }
    const auto path = std::filesystem::temp_directory_path() / "conceptscope_phi.csv";
    write_phi_csv(path.string(), t);
    const PhiTable back = read_phi_csv(path.string());
    for (const auto & [h, row] : t.values) {
        CHECK(back.at(h, Attribute::Concept) == row.at(Attribute::Concept));
        CHECK(std::isnan(back.at(h, Attribute::QuestionType)));
    }
    std::filesystem::remove(path);

    const auto top = top_heads_by_phi(t, Attribute::Concept, 2);
    REQUIRE(top.size() == 2);
    CHECK(t.at(top[0], Attribute::Concept) >= t.at(top[1], Attribute::Concept));
    CHECK(top_heads_by_phi(t, Attribute::QuestionType, 2).empty());
}

TEST_CASE("concept vectors sum dataset means over the chosen heads") {
    const HeadOutputs outputs = {{{0, 0}, {Vec{1.0, 0.0}, Vec{3.0, 2.0}}}, {{0, 1}, {Vec{0.0, 1.0}, Vec{0.0, 1.0}}}};
    const auto per_prompt = per_prompt_vectors(outputs, {{0, 0}, {0, 1}});
    CHECK(per_prompt == std::vector<Vec>{Vec{1.0, 1.0}, Vec{3.0, 3.0}});
    const HeadVectors means = {{{0, 0}, Vec{2.0, 1.0}}, {{0, 1}, Vec{0.0, 1.0}}};
    CHECK(build_concept_vector(means, {{0, 0}, {0, 1}}) == Vec{2.0, 2.0});
    const HeadOutputs sel = select_prompts(outputs, {1});
    CHECK(sel.at({0, 0}) == std::vector<Vec>{Vec{3.0, 2.0}});
}

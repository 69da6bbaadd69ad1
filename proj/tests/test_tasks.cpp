#include "conceptscope/acceptance.hpp"
#include "conceptscope/pipeline.hpp"
#include "conceptscope/tasks.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

using namespace conceptscope;

namespace {

const World & world() {
    static const World w = build_world(21);
    return w;
}

const Vocabulary & vocab() {
    static const Vocabulary v = Vocabulary::build(world());
    return v;
}

} // namespace

TEST_CASE("lexicons are deterministic and large enough") {
    const auto a = build_lexicons(21);
    const auto b = build_lexicons(21);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        REQUIRE(a[i].entries.size() == b[i].entries.size());
        for (std::size_t k = 0; k < a[i].entries.size(); ++k) {
            CHECK(a[i].entries[k].input == b[i].entries[k].input);
            CHECK(a[i].entries[k].output == b[i].entries[k].output);
        }
    }
    for (const char * name : {"antonym_en", "antonym_fr", "translation_en_fr", "translation_de_es", "categorical_en",
                              "categorical_es"}) {
        CHECK(world().lexicon(name).entries.size() >= 200);
    }
}

TEST_CASE("antonym lexicons are symmetric and translations are bijective") {
    const Lexicon & ant = world().lexicon("antonym_en");
    for (const auto & e : ant.entries) {
        const auto back = ant.lookup(e.output);
        REQUIRE(back.has_value());
        CHECK(*back == e.input);
    }
    for (const char * name : {"translation_en_fr", "translation_de_es"}) {
        std::set<std::string> outputs;
        for (const auto & e : world().lexicon(name).entries) {
            CHECK(outputs.insert(e.output).second);
        }
    }
}

TEST_CASE("overlap inputs map to different outputs in different lexicons") {
    std::size_t overlapping = 0;
    for (const auto & lx : world().lexicons) {
        for (const auto & e : lx.entries) {
            if (!e.overlap) {
                continue;
            }
            bool differs = false;
            for (const auto & other : world().lexicons) {
                const auto o = &other == &lx ? std::nullopt : other.lookup(e.input);
                differs = differs || (o && *o != e.output);
            }
            CHECK(differs);
            ++overlapping;
        }
    }
    CHECK(overlapping > 0);
}

TEST_CASE("verbal prompts sample distinct entries and respect the split") {
    const Lexicon & lx = world().lexicon("antonym_en");
    const auto prompts = gen_verbal_prompts(lx, 5, 50, Split::Test, 3);
    REQUIRE(prompts.size() == 50);
    std::set<std::string> test_inputs;
    for (const auto & e : lx.in_split(Split::Test)) {
        test_inputs.insert(e.input);
    }
    for (const auto & p : prompts) {
        CHECK(p.shots() == 5);
        std::set<std::string> inputs = {p.query};
        for (const auto & e : p.exemplars) {
            CHECK(inputs.insert(e.input).second);
            CHECK(test_inputs.contains(e.input));
        }
        CHECK(*lx.lookup(p.query) == p.target);
    }
    CHECK(gen_verbal_prompts(lx, 0, 3, Split::Test, 3).front().exemplars.empty());
    CHECK_THROWS_AS(gen_verbal_prompts(lx, lx.in_split(Split::Test).size(), 1, Split::Test, 3), TaskError);
}

TEST_CASE("multiple choice keeps the truth among distinct options") {
    const Lexicon & lx = world().lexicon("translation_en_fr");
    const auto open = gen_verbal_prompts(lx, 5, 30, Split::Test, 8);
    for (std::size_t i = 0; i < open.size(); ++i) {
        const auto mc = to_multiple_choice(open[i], lx, Split::Test, kMcOptions, i);
        const auto pos = std::find(option_labels().begin(), option_labels().end(), mc.target) - option_labels().begin();
        REQUIRE(pos < static_cast<std::ptrdiff_t>(kMcOptions));
        CHECK(mc.query_options.size() == kMcOptions);
        CHECK(mc.query_options[static_cast<std::size_t>(pos)] == open[i].target);
        CHECK(std::set<std::string>(mc.query_options.begin(), mc.query_options.end()).size() == kMcOptions);
        CHECK(std::count(mc.query_options.begin(), mc.query_options.end(), open[i].target) == 1);
        CHECK(mc.attributes.question_type == QuestionType::MultipleChoice);
        CHECK(mc.attributes.response_type == ResponseType::Letter);
        CHECK(mc.attributes.info_source == InfoSource::InPrompt);
        CHECK(mc.attributes.language == Language::None);
        for (std::size_t k = 0; k < mc.exemplars.size(); ++k) {
            const auto & e = mc.exemplars[k];
            const auto at = std::find(option_labels().begin(), option_labels().end(), e.output) - option_labels().begin();
            CHECK(e.options.at(static_cast<std::size_t>(at)) == open[i].exemplars[k].output);
        }
    }
    CHECK_THROWS_AS(to_multiple_choice(open[0], lx, Split::Test, 1, 0), TaskError);
    CHECK_THROWS_AS(to_multiple_choice(to_multiple_choice(open[0], lx, Split::Test, 4, 0), lx, Split::Test, 4, 0),
                    TaskError);
}

TEST_CASE("cyclic lists step forwards and backwards") {
    CHECK(list_step("december", Direction::Next) == "january");
    CHECK(list_step("a", Direction::Previous) == "z");
    for (const auto * list : {&lists::weekdays(), &lists::months(), &lists::letters(), &lists::number_digits(),
                              &lists::number_words()}) {
        for (const auto & item : *list) {
            CHECK(list_step(list_step(item, Direction::Next), Direction::Previous) == item);
        }
    }
}

TEST_CASE("abstract lines agree with the adjacency oracle") {
    Rng rng(17);
    const std::vector<std::string> letters(lists::letters().begin(), lists::letters().begin() + 6);
    for (int i = 0; i < 2000; ++i) {
        const bool next = i % 2 == 0;
        const auto line = make_abstract_line(next ? Direction::Next : Direction::Previous, letters, 1 + i % 4, i % 5, rng);
        CHECK(line.answer == oracle::abstract_answer(line.elements, next));
    }
    CHECK_THROWS_AS(make_abstract_line(Direction::Next, letters, 0, 1, rng), TaskError);
}

TEST_CASE("permuted alphabets") {
    CHECK(permuted_alphabet(0, AlphabetKind::Latin, 4) == lists::letters());
    for (std::size_t n : {2u, 5u, 20u}) {
        auto p = permuted_alphabet(n, AlphabetKind::Latin, 4);
        CHECK(p != lists::letters());
        std::sort(p.begin(), p.end());
        auto sorted = lists::letters();
        std::sort(sorted.begin(), sorted.end());
        CHECK(p == sorted);
    }
    for (const auto & p : gen_letter_string(0, AlphabetKind::Latin, 5, 2)) {
        CHECK(p.preamble == lists::letters());
    }
}

TEST_CASE("targets are present exactly when the information source is the prompt") {
    for (const auto & spec : dataset_table()) {
        const Dataset ds = build_dataset(world(), vocab(), spec.name, 5, 20, 6);
        REQUIRE(ds.prompts.size() == 20);
        for (const auto & p : ds.prompts) {
            CHECK(p.attributes == spec.attributes);
            const auto tokens = render_tokens(p);
            const bool present = std::find(tokens.begin(), tokens.end(), p.target) != tokens.end();
            if (spec.attributes.info_source == InfoSource::NotInPrompt) {
                CHECK_MESSAGE(!present, spec.name);
            } else {
                CHECK_MESSAGE(present, spec.name);
            }
            CHECK(p.rendered == render_prompt(p, vocab()));
        }
    }
}

TEST_CASE("ambiguous prompts carry both continuations") {
    const auto ps = gen_ambiguous_icl(world().lexicon("antonym_en"), world().lexicon("translation_en_fr"), 10, 20,
                                      Split::Test, 5);
    for (const auto & p : ps) {
        REQUIRE(p.alt_targets.size() == 2);
        CHECK(p.alt_targets[0] == *world().lexicon("antonym_en").lookup(p.query));
        CHECK(p.alt_targets[1] == *world().lexicon("translation_en_fr").lookup(p.query));
        CHECK(p.shots() == 10);
    }
}

TEST_CASE("corruption replaces exemplar inputs only") {
    const auto p = build_dataset(world(), vocab(), "antonym_en", 5, 1, 2).prompts.front();
    const auto c = corrupt_prompt(p, world(), 9);
    CHECK(c.query == p.query);
    CHECK(c.target == p.target);
    for (std::size_t i = 0; i < p.exemplars.size(); ++i) {
        CHECK(c.exemplars[i].output == p.exemplars[i].output);
        CHECK(c.exemplars[i].input != p.exemplars[i].input);
    }
}

TEST_CASE("jsonl round trip") {
    const auto path = std::filesystem::temp_directory_path() / "conceptscope_tasks_roundtrip.jsonl";
    auto prompts = build_dataset(world(), vocab(), "translation_en_fr_mc", 3, 5, 1).prompts;
    const auto amb = gen_ambiguous_icl(world().lexicon("antonym_en"), world().lexicon("translation_en_fr"), 2, 2,
                                       Split::Train, 1);
    prompts.insert(prompts.end(), amb.begin(), amb.end());
    write_jsonl(path.string(), prompts);
    CHECK(read_jsonl(path.string()) == prompts);
    std::filesystem::remove(path);
}

TEST_CASE("chi-square upper tail matches closed forms") {
    // Two degrees of freedom: sf(x) = exp(-x / 2).
    for (double x : {0.5, 2.0, 7.0}) {
        CHECK(chi_square_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    }
    CHECK(chi_square_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(7.814727903251178, 3.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 3.0) == doctest::Approx(1.0));
}

TEST_CASE("generator acceptance checks pass") {
    const auto checks = generator_checks(1234);
    REQUIRE(checks.size() == 1);
    CHECK_MESSAGE(checks[0].passed, checks[0].detail);
}

TEST_CASE("overlap weight oversamples overlap queries") {
    // Nearly every input overlaps in the real world, so flag a quarter by hand.
    Lexicon lx = world().lexicon("antonym_en");
    for (std::size_t i = 0; i < lx.entries.size(); ++i) {
        lx.entries[i].overlap = i % 4 == 0;
    }
    const auto share = [&](double w) {
        const auto ps = gen_verbal_prompts(lx, 2, 400, Split::Train, 12, w);
        const auto hits = std::count_if(ps.begin(), ps.end(), [&](const PromptInstance & p) {
            const auto & es = lx.entries;
            return std::any_of(es.begin(), es.end(), [&](const LexEntry & e) { return e.overlap && e.input == p.query; });
        });
        return static_cast<double>(hits) / static_cast<double>(ps.size());
    };
    CHECK(share(1.0) < 0.35);
    CHECK(share(4.0) > share(1.0) + 0.2);
    CHECK_THROWS_AS(gen_verbal_prompts(lx, 2, 1, Split::Train, 12, 0.0), TaskError);
}

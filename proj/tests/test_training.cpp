#include "conceptscope/training.hpp"

#include "doctest.h"
#include "fixture.hpp"

#include <cmath>

using namespace conceptscope;

TEST_CASE("training mixture proportions match the configured weights") {
    TrainConfig c;
    Rng rng(4);
    const int n = 10000;
    std::map<std::string, int> counts;
    for (int i = 0; i < n; ++i) {
        const PromptInstance p = sample_training_prompt(fixture::world(), c, rng);
        std::string family;
        if (!p.source_lexicon.empty()) {
            family = p.attributes.question_type == QuestionType::MultipleChoice ? "verbal_mc" : "verbal_open";
        } else if (p.dataset.find("in_list") != std::string::npos) {
            family = "list";
        } else if (p.dataset.rfind("letter_string", 0) == 0) {
            family = "letter_string";
        } else {
            family = "abstract";
        }
        ++counts[family];
        CHECK(p.shots() >= static_cast<std::size_t>(c.min_shots));
        CHECK(p.shots() <= static_cast<std::size_t>(c.max_shots));
    }
    const auto & m = c.mixture;
    const std::map<std::string, double> want = {{"verbal_open", m.verbal_open}, {"verbal_mc", m.verbal_mc},
                                                {"list", m.list},               {"abstract", m.abstract},
                                                {"letter_string", m.letter_string}};
    const double total = m.verbal_open + m.verbal_mc + m.list + m.abstract + m.letter_string;
    for (const auto & [family, w] : want) {
        CHECK_MESSAGE(std::abs(counts[family] / static_cast<double>(n) - w / total) < 0.02, family);
    }
}

TEST_CASE("learning rate warms up then decays to the floor") {
    TrainConfig c;
    c.steps = 1000;
    c.warmup = 100;
    c.lr = 1e-3;
    CHECK(lr_at(c, 0) < lr_at(c, 50));
    CHECK(lr_at(c, 99) == doctest::Approx(c.lr));
    CHECK(lr_at(c, 999) == doctest::Approx(c.lr * c.min_lr_ratio).epsilon(1e-3));
    for (int s = 100; s < 999; ++s) {
        CHECK(lr_at(c, s + 1) <= lr_at(c, s));
    }
}

TEST_CASE("train config JSON round trip and validation") {
    TrainConfig c;
    c.steps = 17;
    c.lr = 3e-4;
    c.mixture.verbal_mc = 0.33;
    const TrainConfig d = train_config_from_json(to_json(c));
    CHECK(d.steps == 17);
    CHECK(d.lr == c.lr);
    CHECK(d.mixture.verbal_mc == 0.33);
    nlohmann::json bad = to_json(c);
    bad["batch_size"] = 0;
    CHECK_THROWS_AS(train_config_from_json(bad), TrainingError);
}

TEST_CASE("labels sit after every answer marker") {
    const auto p = fixture::prompts("antonym_en", 1, 3).front();
    TrainBatch batch;
    append_example(p, PromptFormat::QA, fixture::vocab(), batch);
    const auto & v = fixture::vocab();
    std::size_t markers = 0;
    for (const auto & tok : render_tokens(p, PromptFormat::QA)) {
        markers += tok == "A:" ? 1 : 0;
    }
    CHECK(batch.n_labels() == markers);
    CHECK(batch.labels.back().back().second == v.id(p.target));
}

TEST_CASE("training is deterministic and lowers the loss") {
    TrainConfig c;
    c.steps = 25;
    c.batch_size = 4;
    c.warmup = 5;
    c.lr = 3e-3;
    c.log_every = 5;
    const auto run = [&] {
        Transformer m = fixture::tiny_model(5);
        std::vector<TrainLogRow> log;
        train(m, fixture::world(), fixture::vocab(), c, 11, [&](TrainLogRow & r) { log.push_back(r); });
        return std::pair{m.params().tensors(), log};
    };
    const auto [a, log_a] = run();
    const auto [b, log_b] = run();
    CHECK(a == b);
    REQUIRE(log_a.size() == 5);
    CHECK(log_a.back().loss < log_a.front().loss);
    CHECK(log_a.back().step == 25);
}

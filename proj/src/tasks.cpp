#include "conceptscope/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace conceptscope {

std::string_view to_string(PromptFormat f) {
    return f == PromptFormat::Arrow ? "arrow" : "qa";
}

PromptFormat parse_format(std::string_view s) {
    if (s == "arrow") {
        return PromptFormat::Arrow;
    }
    if (s == "qa") {
        return PromptFormat::QA;
    }
    throw TaskError("unknown prompt format: " + std::string(s));
}

std::string_view to_string(Direction d) {
    return d == Direction::Previous ? "previous" : "next";
}

const std::vector<std::string> & option_labels() {
    static const std::vector<std::string> v = {"a", "b", "c", "d", "e", "f"};
    return v;
}

namespace {

bool mentions(const ExemplarPair & e, const std::string & token) {
    if (e.output == token) {
        return true;
    }
    for (const auto & t : split_tokens(e.input)) {
        if (t == token) {
            return true;
        }
    }
    return std::find(e.options.begin(), e.options.end(), token) != e.options.end();
}

TaskAttributes verbal_attributes(const Lexicon & lx) {
    TaskAttributes a;
    a.concept_kind = lx.concept_kind;
    a.question_type = QuestionType::Open;
    a.response_type = ResponseType::Word;
    a.info_source = InfoSource::NotInPrompt;
    a.language = lx.output_language;
    return a;
}

} // namespace

std::vector<PromptInstance> gen_verbal_prompts(const Lexicon & lexicon, std::size_t shots, std::size_t n_prompts,
                                               Split split, std::uint64_t seed, double overlap_weight) {
    const std::vector<LexEntry> pool = lexicon.in_split(split);
    if (pool.size() < shots + 1) {
        throw TaskError("gen_verbal_prompts: lexicon '" + lexicon.name + "' has " + std::to_string(pool.size()) +
                        " entries in split, need " + std::to_string(shots + 1));
    }
    if (!(overlap_weight > 0.0)) {
        throw TaskError("gen_verbal_prompts: overlap_weight must be positive");
    }
    std::vector<double> weights;
    for (const auto & e : pool) {
        weights.push_back(e.overlap ? overlap_weight : 1.0);
    }
    std::discrete_distribution<std::size_t> weighted(weights.begin(), weights.end());
    Rng rng(seed);
    std::vector<PromptInstance> out;
    out.reserve(n_prompts);
    for (std::size_t n = 0; n < n_prompts; ++n) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000) {
                throw TaskError("gen_verbal_prompts: cannot sample exemplars for lexicon '" + lexicon.name + "'");
            }
            const LexEntry & q = pool[overlap_weight == 1.0 ? uniform_index(rng, pool.size()) : weighted(rng)];
            // Exemplars never mention the query word or its answer, so the answer
            // is only recoverable from the relation.
            std::vector<std::size_t> eligible;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const auto & e = pool[i];
                if (e.input != q.input && e.input != q.output && e.output != q.output && e.output != q.input) {
                    eligible.push_back(i);
                }
            }
            if (eligible.size() < shots) {
                continue;
            }
            PromptInstance p;
            p.dataset = lexicon.name;
            p.source_lexicon = lexicon.name;
            p.format = PromptFormat::Arrow;
            for (std::size_t k : sample_without_replacement(rng, eligible.size(), shots)) {
                const auto & e = pool[eligible[k]];
                p.exemplars.push_back({e.input, e.output, {}});
            }
            p.query = q.input;
            p.target = q.output;
            p.attributes = verbal_attributes(lexicon);
            out.push_back(std::move(p));
            break;
        }
    }
    return out;
}

PromptInstance to_multiple_choice(const PromptInstance & p, const Lexicon & lexicon, Split split,
                                  std::size_t n_options, std::uint64_t seed) {
    if (p.attributes.question_type != QuestionType::Open || p.attributes.response_type != ResponseType::Word) {
        throw TaskError("to_multiple_choice: prompt is not open-ended with word responses");
    }
    if (n_options < 2 || n_options > option_labels().size()) {
        throw TaskError("to_multiple_choice: unsupported option count");
    }
    const std::vector<std::string> outputs = lexicon.outputs(split);
    Rng rng(seed);

    const auto make_options = [&](const std::string & input, const std::string & truth,
                                  std::vector<std::string> & options) -> std::string {
        std::vector<std::string> distractors;
        for (const auto & o : outputs) {
            if (o != truth && o != input) {
                distractors.push_back(o);
            }
        }
        if (distractors.size() + 1 < n_options) {
            throw TaskError("to_multiple_choice: lexicon '" + lexicon.name + "' too small for distinct distractors");
        }
        options.clear();
        for (std::size_t k : sample_without_replacement(rng, distractors.size(), n_options - 1)) {
            options.push_back(distractors[k]);
        }
        const std::size_t pos = uniform_index(rng, n_options);
        options.insert(options.begin() + static_cast<std::ptrdiff_t>(pos), truth);
        return option_labels()[pos];
    };

    PromptInstance mc = p;
    for (auto & e : mc.exemplars) {
        e.output = make_options(e.input, e.output, e.options);
    }
    mc.target = make_options(mc.query, p.target, mc.query_options);
    mc.attributes.question_type = QuestionType::MultipleChoice;
    mc.attributes.response_type = ResponseType::Letter;
    mc.attributes.info_source = InfoSource::InPrompt;
    mc.attributes.language = Language::None;
    mc.rendered.clear();
    return mc;
}

namespace {

const std::vector<const std::vector<std::string> *> & ordered_lists() {
    static const std::vector<const std::vector<std::string> *> v = {
        &lists::weekdays(), &lists::months(), &lists::letters(), &lists::number_digits(), &lists::number_words()};
    return v;
}

} // namespace

bool in_ordered_list(const std::string & item) {
    for (const auto * list : ordered_lists()) {
        if (std::find(list->begin(), list->end(), item) != list->end()) {
            return true;
        }
    }
    return false;
}

std::string list_step(const std::string & item, Direction d) {
    for (const auto * list : ordered_lists()) {
        const auto it = std::find(list->begin(), list->end(), item);
        if (it != list->end()) {
            const auto n = list->size();
            const auto i = static_cast<std::size_t>(it - list->begin());
            return (*list)[d == Direction::Next ? (i + 1) % n : (i + n - 1) % n];
        }
    }
    throw TaskError("list_step: '" + item + "' is not in an ordered list");
}

std::vector<PromptInstance> gen_list_prevnext(Direction direction, std::size_t n_prompts, std::size_t shots,
                                              std::uint64_t seed) {
    Rng rng(seed);
    const auto & lsts = ordered_lists();
    const auto draw = [&]() -> std::string {
        const auto * list = lsts[uniform_index(rng, lsts.size())];
        return (*list)[uniform_index(rng, list->size())];
    };
    std::vector<PromptInstance> out;
    for (std::size_t n = 0; n < n_prompts; ++n) {
        PromptInstance p;
        p.dataset = direction == Direction::Next ? "next_item_in_list" : "prev_item_in_list";
        p.format = PromptFormat::Arrow;
        p.query = draw();
        p.target = list_step(p.query, direction);
        std::set<std::string> used = {p.query, p.target};
        while (p.exemplars.size() < shots) {
            const std::string x = draw();
            const std::string y = list_step(x, direction);
            if (used.contains(x) || used.contains(y)) {
                continue;
            }
            used.insert(x);
            used.insert(y);
            p.exemplars.push_back({x, y, {}});
        }
        p.attributes = {direction == Direction::Next ? Concept::Next : Concept::Previous, QuestionType::Open,
                        ResponseType::Mixed, InfoSource::NotInPrompt, Language::None};
        out.push_back(std::move(p));
    }
    return out;
}

AbstractLine make_abstract_line(Direction direction, const std::vector<std::string> & target_class,
                                std::size_t m_distractors, std::size_t n_positional, Rng & rng) {
    if (m_distractors < 1) {
        throw TaskError("make_abstract_line: need at least one distractor");
    }
    if (target_class.size() < m_distractors + 1) {
        throw TaskError("make_abstract_line: target class too small");
    }
    for (;;) {
        AbstractLine line;
        for (std::size_t k : sample_without_replacement(rng, target_class.size(), m_distractors + 1)) {
            line.elements.push_back(target_class[k]);
        }
        line.elements.emplace_back("*");
        for (std::size_t i = 0; i < n_positional; ++i) {
            line.elements.emplace_back(".");
        }
        shuffle_in_place(rng, line.elements);
        const auto star = static_cast<std::ptrdiff_t>(
            std::find(line.elements.begin(), line.elements.end(), "*") - line.elements.begin());
        const std::ptrdiff_t step = direction == Direction::Next ? 1 : -1;
        for (std::ptrdiff_t i = star + step; i >= 0 && i < static_cast<std::ptrdiff_t>(line.elements.size());
             i += step) {
            if (line.elements[static_cast<std::size_t>(i)] != ".") {
                line.answer = line.elements[static_cast<std::size_t>(i)];
                break;
            }
        }
        if (!line.answer.empty()) {
            return line;
        }
        // indicator at the boundary (or only dots on that side): resample
    }
}

std::vector<PromptInstance> gen_abstract_prevnext(Direction direction, AbstractVariant variant,
                                                  std::size_t m_distractors, std::size_t n_positional,
                                                  std::size_t n_prompts, std::size_t shots, std::uint64_t seed,
                                                  const World & world) {
    std::vector<std::string> target_class;
    if (variant == AbstractVariant::Letter) {
        const std::size_t n = std::max<std::size_t>(4, m_distractors + 1);
        if (n > lists::letters().size()) {
            throw TaskError("gen_abstract_prevnext: too many distractors for the letter variant");
        }
        target_class.assign(lists::letters().begin(), lists::letters().begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        target_class = world.content_words(Language::EN);
    }
    Rng rng(seed);
    const std::string prefix = direction == Direction::Next ? "next" : "prev";
    const std::string suffix = variant == AbstractVariant::Letter ? "_abstract_letter" : "_abstract_word";
    std::vector<PromptInstance> out;
    for (std::size_t n = 0; n < n_prompts; ++n) {
        PromptInstance p;
        p.dataset = prefix + suffix;
        p.format = PromptFormat::QA;
        for (std::size_t s = 0; s < shots; ++s) {
            AbstractLine line = make_abstract_line(direction, target_class, m_distractors, n_positional, rng);
            p.exemplars.push_back({join_tokens(line.elements), line.answer, {}});
        }
        AbstractLine q = make_abstract_line(direction, target_class, m_distractors, n_positional, rng);
        p.query = join_tokens(q.elements);
        p.target = q.answer;
        p.attributes = {direction == Direction::Next ? Concept::Next : Concept::Previous, QuestionType::Open,
                        variant == AbstractVariant::Letter ? ResponseType::Letter : ResponseType::Word,
                        InfoSource::InPrompt, variant == AbstractVariant::Letter ? Language::None : Language::EN};
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PromptInstance> gen_ambiguous_icl(const Lexicon & lex_a, const Lexicon & lex_b, std::size_t shots,
                                              std::size_t n_prompts, Split split, std::uint64_t seed) {
    if (shots < 2) {
        throw TaskError("gen_ambiguous_icl: need at least two shots");
    }
    const auto pool_a = lex_a.in_split(split);
    const auto pool_b = lex_b.in_split(split);
    if (pool_a.empty() || pool_b.empty()) {
        throw TaskError("gen_ambiguous_icl: empty lexicon split");
    }
    std::vector<std::pair<std::string, std::string>> shared; // (input, output under b)
    for (const auto & a : pool_a) {
        for (const auto & b : pool_b) {
            if (a.input == b.input && a.output != b.output) {
                shared.emplace_back(a.input, b.output);
            }
        }
    }
    if (shared.empty()) {
        throw TaskError("gen_ambiguous_icl: no inputs valid under both lexicons");
    }
    Rng rng(seed);
    std::vector<PromptInstance> out;
    for (std::size_t n = 0; n < n_prompts; ++n) {
        const auto & [query, out_b] = shared[uniform_index(rng, shared.size())];
        const std::string out_a = *lex_a.lookup(query);
        PromptInstance p;
        p.dataset = "ambiguous_" + lex_a.name + "_" + lex_b.name;
        p.source_lexicon = lex_a.name;
        p.format = PromptFormat::QA;
        p.query = query;
        p.target = out_a;
        p.alt_targets = {out_a, out_b};
        const std::set<std::string> banned = {query, out_a, out_b};
        for (;;) {
            p.exemplars.clear();
            std::set<std::string> used;
            bool saw_a = false;
            bool saw_b = false;
            while (p.exemplars.size() < shots) {
                const bool from_a = uniform_index(rng, 2) == 0;
                const auto & pool = from_a ? pool_a : pool_b;
                const auto & e = pool[uniform_index(rng, pool.size())];
                if (banned.contains(e.input) || banned.contains(e.output) || used.contains(e.input)) {
                    continue;
                }
                used.insert(e.input);
                (from_a ? saw_a : saw_b) = true;
                p.exemplars.push_back({e.input, e.output, {}});
            }
            if (saw_a && saw_b) {
                break;
            }
        }
        p.attributes = verbal_attributes(lex_a);
        p.second_concept = lex_b.concept_kind;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<std::string> permuted_alphabet(std::size_t n_perm, AlphabetKind kind, std::uint64_t seed) {
    std::vector<std::string> alphabet = kind == AlphabetKind::Latin ? lists::letters() : lists::symbols();
    Rng rng(seed);
    for (std::size_t k = 0; k < n_perm; ++k) {
        const auto pair = sample_without_replacement(rng, alphabet.size(), 2);
        std::swap(alphabet[pair[0]], alphabet[pair[1]]);
    }
    return alphabet;
}

std::vector<PromptInstance> gen_letter_string(std::size_t n_perm, AlphabetKind kind, std::size_t n_prompts,
                                              std::uint64_t seed) {
    if (kind == AlphabetKind::Symbolic && n_perm != 0) {
        throw TaskError("gen_letter_string: symbolic alphabets are not permuted");
    }
    const std::vector<std::string> alphabet = permuted_alphabet(n_perm, kind, substream_seed(seed, "alphabet"));
    Rng rng(substream_seed(seed, "prompts"));
    const std::size_t run = 3;
    const std::size_t starts = alphabet.size() - run; // start + run must index a successor
    const auto segment = [&](std::size_t start) {
        std::vector<std::string> s(alphabet.begin() + static_cast<std::ptrdiff_t>(start),
                                   alphabet.begin() + static_cast<std::ptrdiff_t>(start + run));
        return join_tokens(s);
    };
    std::vector<PromptInstance> out;
    for (std::size_t n = 0; n < n_prompts; ++n) {
        const auto picks = sample_without_replacement(rng, starts, 2);
        PromptInstance p;
        p.dataset = kind == AlphabetKind::Symbolic ? "letter_string_symbolic"
                                                   : "letter_string_perm" + std::to_string(n_perm);
        p.format = PromptFormat::QA;
        p.preamble = alphabet;
        p.exemplars.push_back({segment(picks[0]), alphabet[picks[0] + run], {}});
        p.query = segment(picks[1]);
        p.target = alphabet[picks[1] + run];
        p.attributes = {Concept::Next, QuestionType::Open, ResponseType::Letter, InfoSource::InPrompt,
                        Language::None};
        out.push_back(std::move(p));
    }
    return out;
}

const std::vector<LetterStringSetting> & letter_string_settings() {
    static const std::vector<LetterStringSetting> v = {
        {"0", 0, AlphabetKind::Latin, 1.0 / 26.0},  {"2", 2, AlphabetKind::Latin, 1.0 / 26.0},
        {"5", 5, AlphabetKind::Latin, 1.0 / 26.0},  {"10", 10, AlphabetKind::Latin, 1.0 / 26.0},
        {"20", 20, AlphabetKind::Latin, 1.0 / 26.0}, {"symbolic", 0, AlphabetKind::Symbolic, 0.1},
    };
    return v;
}

// --- rendering ---------------------------------------------------------------

std::vector<std::string> render_tokens(const PromptInstance & p, PromptFormat format) {
    std::vector<std::string> out;
    if (!p.preamble.empty()) {
        out.insert(out.end(), p.preamble.begin(), p.preamble.end());
        out.emplace_back(kNewline);
    }
    const auto append_item = [&](const std::string & input, const std::vector<std::string> & options) {
        // Options precede the item so the item sits next to the answer marker.
        for (std::size_t i = 0; i < options.size(); ++i) {
            out.push_back(option_labels().at(i));
            out.push_back(options[i]);
        }
        for (auto & t : split_tokens(input)) {
            out.push_back(std::move(t));
        }
    };
    for (const auto & e : p.exemplars) {
        if (format == PromptFormat::Arrow) {
            append_item(e.input, e.options);
            out.emplace_back("->");
            out.push_back(e.output);
            out.emplace_back(":");
        } else {
            out.emplace_back("Q:");
            append_item(e.input, e.options);
            out.emplace_back("A:");
            out.push_back(e.output);
            out.emplace_back(kNewline);
        }
    }
    if (format == PromptFormat::Arrow) {
        append_item(p.query, p.query_options);
        out.emplace_back("->");
    } else {
        out.emplace_back("Q:");
        append_item(p.query, p.query_options);
        out.emplace_back("A:");
    }
    return out;
}

std::vector<std::string> render_tokens(const PromptInstance & p) {
    return render_tokens(p, p.format);
}

std::vector<TokenId> render_prompt(const PromptInstance & p, PromptFormat format, const Vocabulary & vocab) {
    std::vector<TokenId> ids;
    for (const auto & t : render_tokens(p, format)) {
        ids.push_back(vocab.id(t));
    }
    return ids;
}

std::vector<TokenId> render_prompt(const PromptInstance & p, const Vocabulary & vocab) {
    return render_prompt(p, p.format, vocab);
}

std::string render_text(const PromptInstance & p) {
    return join_tokens(render_tokens(p));
}

void attach_rendering(std::vector<PromptInstance> & prompts, const Vocabulary & vocab) {
    for (auto & p : prompts) {
        p.rendered = render_prompt(p, vocab);
    }
}

PromptInstance corrupt_prompt(const PromptInstance & p, const World & world, std::uint64_t seed) {
    if (p.exemplars.empty()) {
        throw TaskError("corrupt_prompt: prompt has no exemplars");
    }
    const Lexicon * source = p.source_lexicon.empty() ? nullptr : &world.lexicon(p.source_lexicon);
    const std::vector<std::string> pool =
        world.content_words(source != nullptr ? source->input_language : Language::EN);
    Rng rng(seed);

    PromptInstance c = p;
    for (auto & e : c.exemplars) {
        const std::size_t n_tokens = split_tokens(e.input).size();
        std::vector<std::string> replaced;
        while (replaced.size() < n_tokens) {
            const std::string & w = pool[uniform_index(rng, pool.size())];
            if (w == p.query || w == p.target || mentions(e, w)) {
                continue;
            }
            if (source != nullptr) {
                // Must not accidentally form a valid pair with this exemplar's answer.
                const auto truth = source->lookup(w);
                const std::string answer = e.options.empty() ? e.output : e.options.at(
                    static_cast<std::size_t>(std::find(option_labels().begin(), option_labels().end(), e.output) -
                                             option_labels().begin()));
                if (truth.has_value() && *truth == answer) {
                    continue;
                }
            }
            replaced.push_back(w);
        }
        e.input = join_tokens(replaced);
    }
    c.rendered.clear();
    return c;
}

// --- dataset table -------------------------------------------------------------

const std::vector<DatasetSpec> & dataset_table() {
    using C = Concept;
    using Q = QuestionType;
    using R = ResponseType;
    using I = InfoSource;
    using L = Language;
    static const std::vector<DatasetSpec> v = {
        {"translation_en_fr", {C::Translation, Q::Open, R::Word, I::NotInPrompt, L::FR}, true},
        {"translation_de_es", {C::Translation, Q::Open, R::Word, I::NotInPrompt, L::ES}, true},
        {"translation_en_fr_mc", {C::Translation, Q::MultipleChoice, R::Letter, I::InPrompt, L::None}, true},
        {"antonym_en", {C::Antonym, Q::Open, R::Word, I::NotInPrompt, L::EN}, true},
        {"antonym_fr", {C::Antonym, Q::Open, R::Word, I::NotInPrompt, L::FR}, true},
        {"antonym_mc", {C::Antonym, Q::MultipleChoice, R::Letter, I::InPrompt, L::None}, true},
        {"categorical_en", {C::Categorical, Q::Open, R::Word, I::NotInPrompt, L::EN}, true},
        {"categorical_es", {C::Categorical, Q::Open, R::Word, I::NotInPrompt, L::ES}, true},
        {"categorical_mc", {C::Categorical, Q::MultipleChoice, R::Letter, I::InPrompt, L::None}, true},
        {"prev_item_in_list", {C::Previous, Q::Open, R::Mixed, I::NotInPrompt, L::None}, false},
        {"prev_abstract_letter", {C::Previous, Q::Open, R::Letter, I::InPrompt, L::None}, false},
        {"prev_abstract_word", {C::Previous, Q::Open, R::Word, I::InPrompt, L::EN}, false},
        {"next_item_in_list", {C::Next, Q::Open, R::Mixed, I::NotInPrompt, L::None}, false},
        {"next_abstract_letter", {C::Next, Q::Open, R::Letter, I::InPrompt, L::None}, false},
        {"next_abstract_word", {C::Next, Q::Open, R::Word, I::InPrompt, L::EN}, false},
    };
    return v;
}

const DatasetSpec & dataset_spec(const std::string & name) {
    for (const auto & s : dataset_table()) {
        if (s.name == name) {
            return s;
        }
    }
    throw TaskError("unknown dataset: " + name);
}

std::vector<std::string> verbal_dataset_names() {
    std::vector<std::string> out;
    for (const auto & s : dataset_table()) {
        if (s.verbal) {
            out.push_back(s.name);
        }
    }
    return out;
}

std::vector<std::string> abstract_dataset_names() {
    std::vector<std::string> out;
    for (const auto & s : dataset_table()) {
        if (!s.verbal) {
            out.push_back(s.name);
        }
    }
    return out;
}

Dataset build_dataset(const World & world, const Vocabulary & vocab, const std::string & name, std::size_t shots,
                      std::size_t n_prompts, std::uint64_t seed) {
    const std::uint64_t s = substream_seed(seed, name + "/" + std::to_string(shots));
    Dataset ds;
    ds.name = name;
    const auto mc_from = [&](const std::string & lexicon) {
        const Lexicon & lx = world.lexicon(lexicon);
        auto open = gen_verbal_prompts(lx, shots, n_prompts, Split::Test, s);
        std::vector<PromptInstance> out;
        for (std::size_t i = 0; i < open.size(); ++i) {
            PromptInstance mc = to_multiple_choice(open[i], lx, Split::Test, kMcOptions, substream_seed(s, "mc" + std::to_string(i)));
            mc.dataset = name;
            out.push_back(std::move(mc));
        }
        return out;
    };
    if (name == "translation_en_fr_mc") {
        ds.prompts = mc_from("translation_en_fr");
    } else if (name == "antonym_mc") {
        ds.prompts = mc_from("antonym_en");
    } else if (name == "categorical_mc") {
        ds.prompts = mc_from("categorical_en");
    } else if (name == "prev_item_in_list" || name == "next_item_in_list") {
        ds.prompts = gen_list_prevnext(name[0] == 'n' ? Direction::Next : Direction::Previous, n_prompts, shots, s);
    } else if (name.find("_abstract_") != std::string::npos) {
        const Direction d = name[0] == 'n' ? Direction::Next : Direction::Previous;
        const AbstractVariant v = name.ends_with("letter") ? AbstractVariant::Letter : AbstractVariant::Word;
        ds.prompts = gen_abstract_prevnext(d, v, 3, 3, n_prompts, shots, s, world);
    } else {
        (void)dataset_spec(name);
        ds.prompts = gen_verbal_prompts(world.lexicon(name), shots, n_prompts, Split::Test, s);
    }
    attach_rendering(ds.prompts, vocab);
    return ds;
}

// --- serialization -------------------------------------------------------------

nlohmann::json to_json(const PromptInstance & p) {
    nlohmann::json ex = nlohmann::json::array();
    for (const auto & e : p.exemplars) {
        nlohmann::json je = {{"input", e.input}, {"output", e.output}};
        if (!e.options.empty()) {
            je["options"] = e.options;
        }
        ex.push_back(std::move(je));
    }
    nlohmann::json attrs = {
        {"concept", to_string(p.attributes.concept_kind)},
        {"question_type", to_string(p.attributes.question_type)},
        {"response_type", to_string(p.attributes.response_type)},
        {"info_source", to_string(p.attributes.info_source)},
        {"language", to_string(p.attributes.language)},
    };
    if (p.second_concept) {
        attrs["second_concept"] = to_string(*p.second_concept);
    }
    nlohmann::json j = {
        {"dataset", p.dataset},
        {"format", to_string(p.format)},
        {"exemplars", std::move(ex)},
        {"query", p.query},
        {"target", p.target},
        {"alt_targets", p.alt_targets},
        {"attributes", std::move(attrs)},
        {"rendered_ids", p.rendered},
    };
    if (!p.query_options.empty()) {
        j["query_options"] = p.query_options;
    }
    if (!p.preamble.empty()) {
        j["preamble"] = p.preamble;
    }
    if (!p.source_lexicon.empty()) {
        j["source_lexicon"] = p.source_lexicon;
    }
    return j;
}

PromptInstance prompt_from_json(const nlohmann::json & j) {
    PromptInstance p;
    p.dataset = j.at("dataset").get<std::string>();
    p.format = parse_format(j.at("format").get<std::string>());
    for (const auto & je : j.at("exemplars")) {
        ExemplarPair e;
        e.input = je.at("input").get<std::string>();
        e.output = je.at("output").get<std::string>();
        if (je.contains("options")) {
            e.options = je.at("options").get<std::vector<std::string>>();
        }
        p.exemplars.push_back(std::move(e));
    }
    p.query = j.at("query").get<std::string>();
    p.target = j.at("target").get<std::string>();
    p.alt_targets = j.at("alt_targets").get<std::vector<std::string>>();
    const auto & a = j.at("attributes");
    p.attributes.concept_kind = parse_concept(a.at("concept").get<std::string>());
    p.attributes.question_type = parse_question_type(a.at("question_type").get<std::string>());
    p.attributes.response_type = parse_response_type(a.at("response_type").get<std::string>());
    p.attributes.info_source = parse_info_source(a.at("info_source").get<std::string>());
    p.attributes.language = parse_language(a.at("language").get<std::string>());
    if (a.contains("second_concept")) {
        p.second_concept = parse_concept(a.at("second_concept").get<std::string>());
    }
    p.rendered = j.at("rendered_ids").get<std::vector<TokenId>>();
    if (j.contains("query_options")) {
        p.query_options = j.at("query_options").get<std::vector<std::string>>();
    }
    if (j.contains("preamble")) {
        p.preamble = j.at("preamble").get<std::vector<std::string>>();
    }
    if (j.contains("source_lexicon")) {
        p.source_lexicon = j.at("source_lexicon").get<std::string>();
    }
    return p;
}

void write_jsonl(const std::string & path, const std::vector<PromptInstance> & prompts) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    for (const auto & p : prompts) {
        f << to_json(p).dump() << '\n';
    }
}

std::vector<PromptInstance> read_jsonl(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot read " + path);
    }
    std::vector<PromptInstance> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) {
            out.push_back(prompt_from_json(nlohmann::json::parse(line)));
        }
    }
    return out;
}

} // namespace conceptscope

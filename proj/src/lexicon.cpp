#include "conceptscope/lexicon.hpp"

#include "conceptscope/rng.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace conceptscope {

std::string_view to_string(Split s) {
    return s == Split::Train ? "train" : "test";
}

std::optional<std::string> Lexicon::lookup(const std::string & input) const {
    for (const auto & e : entries) {
        if (e.input == input) {
            return e.output;
        }
    }
    return std::nullopt;
}

std::vector<LexEntry> Lexicon::in_split(Split s) const {
    std::vector<LexEntry> out;
    for (const auto & e : entries) {
        if (e.split == s) {
            out.push_back(e);
        }
    }
    return out;
}

std::vector<std::string> Lexicon::outputs(Split s) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto & e : entries) {
        if (e.split == s && seen.insert(e.output).second) {
            out.push_back(e.output);
        }
    }
    return out;
}

const Lexicon & World::lexicon(const std::string & name) const {
    for (const auto & lx : lexicons) {
        if (lx.name == name) {
            return lx;
        }
    }
    throw std::invalid_argument("unknown lexicon: " + name);
}

std::vector<std::string> World::content_words(Language lang) const {
    std::vector<std::string> out;
    for (const auto & [text, f] : words) {
        if (f.kind == TokenKind::Content && f.language == lang) {
            out.push_back(text);
        }
    }
    return out;
}

namespace lists {

const std::vector<std::string> & weekdays() {
    static const std::vector<std::string> v = {"monday", "tuesday", "wednesday", "thursday",
                                               "friday", "saturday", "sunday"};
    return v;
}

const std::vector<std::string> & months() {
    static const std::vector<std::string> v = {"january", "february", "march",     "april",
                                               "may",     "june",     "july",      "august",
                                               "september", "october", "november", "december"};
    return v;
}

const std::vector<std::string> & letters() {
    static const std::vector<std::string> v = [] {
        std::vector<std::string> out;
        for (char c = 'a'; c <= 'z'; ++c) {
            out.emplace_back(1, c);
        }
        return out;
    }();
    return v;
}

const std::vector<std::string> & number_digits() {
    static const std::vector<std::string> v = [] {
        std::vector<std::string> out;
        for (int i = 0; i < 20; ++i) {
            out.push_back(std::to_string(i));
        }
        return out;
    }();
    return v;
}

const std::vector<std::string> & number_words() {
    static const std::vector<std::string> v = {
        "zero",  "one",    "two",    "three",    "four",     "five",    "six",
        "seven", "eight",  "nine",   "ten",      "eleven",   "twelve",  "thirteen",
        "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
    return v;
}

const std::vector<std::string> & symbols() {
    static const std::vector<std::string> v = {"#", "$", "*", "!", "@", "%", "&", "+", "=", "~"};
    return v;
}

const std::vector<std::string> & structural() {
    static const std::vector<std::string> v = {"Q:", "A:", "->", ":", "*", ".", kNewline};
    return v;
}

} // namespace lists

namespace {

constexpr int kCategories = 16;
constexpr int kStemsPerCategory = 8;
constexpr double kCoverage = 0.85;
constexpr double kTestFraction = 0.25;

constexpr std::array<Language, 4> kLanguages = {Language::EN, Language::FR, Language::DE, Language::ES};

int lang_index(Language l) {
    for (std::size_t i = 0; i < kLanguages.size(); ++i) {
        if (kLanguages[i] == l) {
            return static_cast<int>(i);
        }
    }
    throw std::invalid_argument("language without surface forms");
}

// Real antonym pairs seeding the first stems of category 0, as
// {EN+, EN-, FR+, FR-, DE+, DE-, ES+, ES-}.
const std::vector<std::array<const char *, 8>> & seed_pairs() {
    static const std::vector<std::array<const char *, 8>> v = {
        {"big", "small", "grand", "petit", "gross", "klein", "grande", "chico"},
        {"hot", "cold", "chaud", "froid", "heiss", "kalt", "caliente", "frio"},
        {"clean", "dirty", "propre", "sale", "sauber", "schmutzig", "limpio", "sucio"},
        {"fast", "slow", "rapide", "lent", "schnell", "langsam", "rapido", "lento"},
        {"indoor", "outdoor", "dedans", "dehors", "drinnen", "draussen", "adentro", "afuera"},
        {"western", "eastern", "ouest", "est", "westlich", "oestlich", "oeste", "este"},
        {"open", "closed", "ouvert", "ferme", "offen", "zu", "abierto", "cerrado"},
    };
    return v;
}

const std::array<const char *, kCategories> & english_categories() {
    static const std::array<const char *, kCategories> v = {
        "quality", "animal", "fruit",   "tool",   "color", "vehicle", "plant", "metal",
        "fabric",  "weather", "emotion", "sport", "music", "food",    "building", "furniture"};
    return v;
}

struct Phonology {
    std::vector<std::string> onsets;
    std::vector<std::string> vowels;
    std::vector<std::string> endings;
};

const Phonology & phonology(Language l) {
    static const Phonology en{{"b", "br", "d", "f", "fl", "g", "gr", "h", "k", "l", "m", "n", "p", "pl", "r",
                               "s", "sl", "st", "t", "tr", "v", "w"},
                              {"a", "e", "i", "o", "u", "ea", "oo"},
                              {"n", "t", "d", "k", "st", "m", "rt", "sh", "ck", "ll"}};
    static const Phonology fr{{"b", "c", "ch", "d", "f", "g", "j", "l", "m", "n", "p", "r", "s", "t", "v"},
                              {"a", "e", "i", "o", "ou", "ai", "au"},
                              {"e", "ette", "eux", "ier", "on", "eau", "ais", "ine"}};
    static const Phonology de{{"b", "d", "f", "g", "h", "k", "kl", "kr", "l", "m", "n", "p", "r", "sch", "st",
                               "t", "w", "z"},
                              {"a", "e", "i", "o", "u", "ei", "au", "ie"},
                              {"en", "er", "ung", "ch", "ck", "ng", "lz", "heit"}};
    static const Phonology es{{"b", "c", "d", "f", "g", "ll", "m", "n", "p", "r", "s", "t", "v"},
                              {"a", "e", "i", "o", "u", "ue", "ie"},
                              {"o", "a", "os", "ero", "ado", "ito", "illa", "ez"}};
    switch (l) {
    case Language::EN: return en;
    case Language::FR: return fr;
    case Language::DE: return de;
    case Language::ES: return es;
    default: break;
    }
    throw std::invalid_argument("no phonology for language");
}

class WordForge {
public:
    explicit WordForge(Rng & rng) : rng_(rng) {
        for (const auto * list : {&lists::weekdays(), &lists::months(), &lists::letters(), &lists::number_digits(),
                                  &lists::number_words(), &lists::symbols(), &lists::structural()}) {
            taken_.insert(list->begin(), list->end());
        }
    }

    bool claim(const std::string & w) { return taken_.insert(w).second; }

    std::string fresh(Language l) {
        const Phonology & ph = phonology(l);
        for (;;) {
            std::string w;
            w += pick(ph.onsets);
            w += pick(ph.vowels);
            w += pick(ph.onsets);
            w += pick(ph.vowels);
            w += pick(ph.endings);
            if (claim(w)) {
                return w;
            }
        }
    }

private:
    const std::string & pick(const std::vector<std::string> & v) { return v[uniform_index(rng_, v.size())]; }

    Rng & rng_;
    std::set<std::string> taken_;
};

struct Surface {
    // [stem][polarity index][language]
    std::vector<std::array<std::array<std::string, 4>, 2>> content;
    // [category][language]
    std::vector<std::array<std::string, 4>> category;
};

std::vector<int> covered_stems(Rng & rng, int n_stems) {
    const auto k = static_cast<std::size_t>(kCoverage * n_stems + 0.5);
    auto idx = sample_without_replacement(rng, static_cast<std::size_t>(n_stems), k);
    std::vector<int> out(idx.begin(), idx.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Split> assign_splits(Rng & rng, std::size_t n) {
    const auto n_test = static_cast<std::size_t>(kTestFraction * static_cast<double>(n) + 0.5);
    std::vector<Split> out(n, Split::Train);
    for (std::size_t i : sample_without_replacement(rng, n, n_test)) {
        out[i] = Split::Test;
    }
    return out;
}

} // namespace

World build_world(std::uint64_t seed) {
    World world;
    world.seed = seed;
    world.n_categories = kCategories;
    world.stems_per_category = kStemsPerCategory;
    const int n_stems = kCategories * kStemsPerCategory;

    Rng word_rng = make_rng(seed, "lexicon/words");
    WordForge forge(word_rng);

    Surface surface;
    surface.content.resize(static_cast<std::size_t>(n_stems));
    surface.category.resize(kCategories);

    const auto & seeds = seed_pairs();
    for (int stem = 0; stem < n_stems; ++stem) {
        for (int li = 0; li < 4; ++li) {
            for (int pi = 0; pi < 2; ++pi) {
                std::string w;
                if (static_cast<std::size_t>(stem) < seeds.size()) {
                    std::string candidate = seeds[static_cast<std::size_t>(stem)][static_cast<std::size_t>(2 * li + pi)];
                    if (forge.claim(candidate)) {
                        w = candidate;
                    }
                }
                if (w.empty()) {
                    w = forge.fresh(kLanguages[static_cast<std::size_t>(li)]);
                }
                surface.content[static_cast<std::size_t>(stem)][static_cast<std::size_t>(pi)][static_cast<std::size_t>(li)] = w;
            }
        }
    }
    for (int c = 0; c < kCategories; ++c) {
        for (int li = 0; li < 4; ++li) {
            std::string w;
            if (li == 0 && forge.claim(english_categories()[static_cast<std::size_t>(c)])) {
                w = english_categories()[static_cast<std::size_t>(c)];
            } else {
                w = forge.fresh(kLanguages[static_cast<std::size_t>(li)]);
            }
            surface.category[static_cast<std::size_t>(c)][static_cast<std::size_t>(li)] = w;
        }
    }

    // Word table in a fixed order: content by (stem, polarity, language), then categories.
    for (int stem = 0; stem < n_stems; ++stem) {
        for (int pi = 0; pi < 2; ++pi) {
            for (int li = 0; li < 4; ++li) {
                WordFeatures f;
                f.kind = TokenKind::Content;
                f.language = kLanguages[static_cast<std::size_t>(li)];
                f.stem = stem;
                f.category = stem / kStemsPerCategory;
                f.polarity = pi == 0 ? 1 : -1;
                world.words.emplace_back(
                    surface.content[static_cast<std::size_t>(stem)][static_cast<std::size_t>(pi)][static_cast<std::size_t>(li)], f);
            }
        }
    }
    for (int c = 0; c < kCategories; ++c) {
        for (int li = 0; li < 4; ++li) {
            WordFeatures f;
            f.kind = TokenKind::CategoryWord;
            f.language = kLanguages[static_cast<std::size_t>(li)];
            f.category = c;
            world.words.emplace_back(surface.category[static_cast<std::size_t>(c)][static_cast<std::size_t>(li)], f);
        }
    }

    const auto word = [&](int stem, int pi, Language l) -> const std::string & {
        return surface.content[static_cast<std::size_t>(stem)][static_cast<std::size_t>(pi)][static_cast<std::size_t>(lang_index(l))];
    };

    // Lexicons are generated per stem; both polarities of a stem share coverage
    // and split, which keeps antonym reverse pairs in the same split.
    struct Spec {
        std::string name;
        Concept concept_kind;
        Language in;
        Language out;
        bool evaluated;
    };
    const std::vector<Spec> specs = {
        {"antonym_en", Concept::Antonym, Language::EN, Language::EN, true},
        {"antonym_fr", Concept::Antonym, Language::FR, Language::FR, true},
        {"translation_en_fr", Concept::Translation, Language::EN, Language::FR, true},
        {"translation_de_es", Concept::Translation, Language::DE, Language::ES, true},
        {"categorical_en", Concept::Categorical, Language::EN, Language::EN, true},
        {"categorical_es", Concept::Categorical, Language::ES, Language::ES, true},
        // Training-only relations so that the input language never identifies the task.
        {"antonym_de", Concept::Antonym, Language::DE, Language::DE, false},
        {"antonym_es", Concept::Antonym, Language::ES, Language::ES, false},
        {"categorical_fr", Concept::Categorical, Language::FR, Language::FR, false},
        {"categorical_de", Concept::Categorical, Language::DE, Language::DE, false},
        {"translation_fr_en", Concept::Translation, Language::FR, Language::EN, false},
        {"translation_es_de", Concept::Translation, Language::ES, Language::DE, false},
        {"translation_en_es", Concept::Translation, Language::EN, Language::ES, false},
        {"translation_de_en", Concept::Translation, Language::DE, Language::EN, false},
    };

    for (const Spec & spec : specs) {
        Rng rng = make_rng(seed, "lexicon/" + spec.name);
        const std::vector<int> stems = covered_stems(rng, n_stems);
        const std::vector<Split> splits = assign_splits(rng, stems.size());

        Lexicon lx;
        lx.name = spec.name;
        lx.concept_kind = spec.concept_kind;
        lx.input_language = spec.in;
        lx.output_language = spec.out;
        lx.evaluated = spec.evaluated;
        for (std::size_t i = 0; i < stems.size(); ++i) {
            const int stem = stems[i];
            for (int pi = 0; pi < 2; ++pi) {
                LexEntry e;
                e.input = word(stem, pi, spec.in);
                switch (spec.concept_kind) {
                case Concept::Antonym: e.output = word(stem, 1 - pi, spec.out); break;
                case Concept::Translation: e.output = word(stem, pi, spec.out); break;
                case Concept::Categorical:
                    e.output = surface.category[static_cast<std::size_t>(stem / kStemsPerCategory)]
                                               [static_cast<std::size_t>(lang_index(spec.out))];
                    break;
                default: throw std::logic_error("unsupported lexicon concept");
                }
                e.split = splits[i];
                lx.entries.push_back(std::move(e));
            }
        }
        world.lexicons.push_back(std::move(lx));
    }

    std::unordered_map<std::string, std::set<std::string>> outputs_by_input;
    for (const auto & lx : world.lexicons) {
        for (const auto & e : lx.entries) {
            outputs_by_input[e.input].insert(e.output);
        }
    }
    for (auto & lx : world.lexicons) {
        for (auto & e : lx.entries) {
            e.overlap = outputs_by_input[e.input].size() >= 2;
        }
    }
    return world;
}

std::vector<Lexicon> build_lexicons(std::uint64_t seed) {
    return build_world(seed).lexicons;
}

} // namespace conceptscope

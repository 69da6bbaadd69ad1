#pragma once

#include "conceptscope/attributes.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace conceptscope {

enum class Split { Train, Test };

std::string_view to_string(Split s);

// What a vocabulary item is. Lexical items additionally carry latent
// meaning coordinates (stem, category, polarity) and a language.
enum class TokenKind { Structural, Content, CategoryWord, Letter, NumberDigit, NumberWord, Weekday, Month, Symbol };

struct WordFeatures {
    TokenKind kind = TokenKind::Structural;
    Language language = Language::None;
    int stem = -1;     // shared by all surface forms of a meaning pair
    int category = -1;
    int polarity = 0;  // +1 / -1 for content words, 0 otherwise
};

struct LexEntry {
    std::string input;
    std::string output;
    Split split = Split::Train;
    bool overlap = false; // input maps to a different output in another lexicon
};

struct Lexicon {
    std::string name;
    Concept concept_kind = Concept::Antonym;
    Language input_language = Language::EN;
    Language output_language = Language::EN;
    bool evaluated = false; // appears in the evaluation dataset table
    std::vector<LexEntry> entries;

    std::optional<std::string> lookup(const std::string & input) const;
    std::vector<LexEntry> in_split(Split s) const;
    // Distinct outputs of entries in the split, in first-seen order.
    std::vector<std::string> outputs(Split s) const;
};

// Synthetic vocabulary with latent meaning structure plus all lexicons over it.
struct World {
    std::uint64_t seed = 0;
    int n_categories = 0;
    int stems_per_category = 0;
    std::vector<std::pair<std::string, WordFeatures>> words; // content + category words
    std::vector<Lexicon> lexicons;

    const Lexicon & lexicon(const std::string & name) const;
    std::vector<std::string> content_words(Language lang) const;
};

World build_world(std::uint64_t seed);

// Convenience: build_world(seed).lexicons.
std::vector<Lexicon> build_lexicons(std::uint64_t seed);

namespace lists {
const std::vector<std::string> & weekdays();
const std::vector<std::string> & months();
const std::vector<std::string> & letters();
const std::vector<std::string> & number_digits();
const std::vector<std::string> & number_words();
const std::vector<std::string> & symbols();
const std::vector<std::string> & structural();
} // namespace lists

inline constexpr const char * kNewline = "\n";

} // namespace conceptscope

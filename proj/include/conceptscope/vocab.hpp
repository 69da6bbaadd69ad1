#pragma once

#include "conceptscope/lexicon.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace conceptscope {

using TokenId = std::int32_t;

class VocabularyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Closed word-level vocabulary. Text is tokens separated by single spaces, with
// the newline token written as '\n' and no spaces around it.
class Vocabulary {
public:
    Vocabulary() = default;

    static Vocabulary build(const World & world);
    // Rebuilds from a stored token list (checkpoint header); features are
    // recomputed from the world with the same seed.
    static Vocabulary from_tokens(const std::vector<std::string> & tokens, const World & world);

    std::size_t size() const { return tokens_.size(); }

    TokenId id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string & token(TokenId id) const;
    const WordFeatures & features(TokenId id) const { return features_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string> & tokens() const { return tokens_; }

    std::vector<TokenId> tokenize(std::string_view text) const;
    std::string detokenize(const std::vector<TokenId> & ids) const;

private:
    void add(const std::string & token, WordFeatures f);

    std::vector<std::string> tokens_;
    std::vector<WordFeatures> features_;
    std::unordered_map<std::string, TokenId> index_;
};

// Splits canonical text into token strings without vocabulary lookup.
std::vector<std::string> split_tokens(std::string_view text);
std::string join_tokens(const std::vector<std::string> & tokens);

} // namespace conceptscope

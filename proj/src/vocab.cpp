#include "conceptscope/vocab.hpp"

namespace conceptscope {

void Vocabulary::add(const std::string & token, WordFeatures f) {
    if (index_.contains(token)) {
        return;
    }
    index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(token);
    features_.push_back(f);
}

Vocabulary Vocabulary::build(const World & world) {
    Vocabulary v;
    const auto add_list = [&](const std::vector<std::string> & list, TokenKind kind) {
        for (const auto & t : list) {
            WordFeatures f;
            f.kind = kind;
            v.add(t, f);
        }
    };
    add_list(lists::structural(), TokenKind::Structural);
    add_list(lists::letters(), TokenKind::Letter);
    add_list(lists::number_digits(), TokenKind::NumberDigit);
    add_list(lists::number_words(), TokenKind::NumberWord);
    add_list(lists::weekdays(), TokenKind::Weekday);
    add_list(lists::months(), TokenKind::Month);
    add_list(lists::symbols(), TokenKind::Symbol);
    for (const auto & [text, f] : world.words) {
        v.add(text, f);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string> & tokens, const World & world) {
    const Vocabulary reference = build(world);
    if (reference.tokens_ != tokens) {
        throw VocabularyError("stored vocabulary does not match the world built from its seed");
    }
    return reference;
}

TokenId Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        throw VocabularyError("out-of-vocabulary token: '" + std::string(token) + "'");
    }
    return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.contains(std::string(token));
}

const std::string & Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw VocabularyError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\n') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            if (c == '\n') {
                out.emplace_back(kNewline);
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

std::string join_tokens(const std::vector<std::string> & tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool nl = tokens[i] == kNewline;
        if (i > 0 && !nl && tokens[i - 1] != kNewline) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto & t : split_tokens(text)) {
        ids.push_back(id(t));
    }
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<TokenId> & ids) const {
    std::vector<std::string> toks;
    toks.reserve(ids.size());
    for (TokenId i : ids) {
        toks.push_back(token(i));
    }
    return join_tokens(toks);
}

} // namespace conceptscope

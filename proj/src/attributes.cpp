#include "conceptscope/attributes.hpp"

#include <stdexcept>
#include <string>

namespace conceptscope {

int TaskAttributes::value_of(Attribute a) const {
    switch (a) {
    case Attribute::Concept: return static_cast<int>(concept_kind);
    case Attribute::QuestionType: return static_cast<int>(question_type);
    case Attribute::ResponseType: return static_cast<int>(response_type);
    case Attribute::InfoSource: return static_cast<int>(info_source);
    case Attribute::Language: return static_cast<int>(language);
    }
    return -1;
}

std::string_view to_string(Concept c) {
    switch (c) {
    case Concept::Antonym: return "antonym";
    case Concept::Translation: return "translation";
    case Concept::Categorical: return "categorical";
    case Concept::Previous: return "previous";
    case Concept::Next: return "next";
    }
    return "?";
}

std::string_view to_string(QuestionType q) {
    return q == QuestionType::Open ? "open" : "multiple_choice";
}

std::string_view to_string(ResponseType r) {
    switch (r) {
    case ResponseType::Word: return "word";
    case ResponseType::Letter: return "letter";
    case ResponseType::Mixed: return "mixed";
    }
    return "?";
}

std::string_view to_string(InfoSource s) {
    return s == InfoSource::InPrompt ? "in_prompt" : "not_in_prompt";
}

std::string_view to_string(Language l) {
    switch (l) {
    case Language::EN: return "EN";
    case Language::FR: return "FR";
    case Language::ES: return "ES";
    case Language::DE: return "DE";
    case Language::None: return "none";
    }
    return "?";
}

std::string_view to_string(Attribute a) {
    switch (a) {
    case Attribute::Concept: return "concept";
    case Attribute::QuestionType: return "question_type";
    case Attribute::ResponseType: return "response_type";
    case Attribute::InfoSource: return "info_source";
    case Attribute::Language: return "language";
    }
    return "?";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N> & values, const char * what) {
    for (E v : values) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw std::invalid_argument(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

} // namespace

Concept parse_concept(std::string_view s) {
    return parse_enum(s,
                      std::array{Concept::Antonym, Concept::Translation, Concept::Categorical,
                                 Concept::Previous, Concept::Next},
                      "concept");
}

QuestionType parse_question_type(std::string_view s) {
    return parse_enum(s, std::array{QuestionType::Open, QuestionType::MultipleChoice}, "question type");
}

ResponseType parse_response_type(std::string_view s) {
    return parse_enum(s, std::array{ResponseType::Word, ResponseType::Letter, ResponseType::Mixed},
                      "response type");
}

InfoSource parse_info_source(std::string_view s) {
    return parse_enum(s, std::array{InfoSource::InPrompt, InfoSource::NotInPrompt}, "info source");
}

Language parse_language(std::string_view s) {
    return parse_enum(s,
                      std::array{Language::EN, Language::FR, Language::ES, Language::DE, Language::None},
                      "language");
}

Attribute parse_attribute(std::string_view s) {
    return parse_enum(s, kAllAttributes, "attribute");
}

} // namespace conceptscope

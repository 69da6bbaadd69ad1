#pragma once

#include <array>
#include <string>
#include <string_view>

namespace conceptscope {

enum class Concept { Antonym, Translation, Categorical, Previous, Next };
enum class QuestionType { Open, MultipleChoice };
enum class ResponseType { Word, Letter, Mixed };
enum class InfoSource { InPrompt, NotInPrompt };
enum class Language { EN, FR, ES, DE, None };

// The attribute axes a design matrix can be built over.
enum class Attribute { Concept, QuestionType, ResponseType, InfoSource, Language };

inline constexpr std::array<Attribute, 5> kAllAttributes = {
    Attribute::Concept, Attribute::QuestionType, Attribute::ResponseType, Attribute::InfoSource,
    Attribute::Language};

struct TaskAttributes {
    Concept concept_kind = Concept::Antonym;
    QuestionType question_type = QuestionType::Open;
    ResponseType response_type = ResponseType::Word;
    InfoSource info_source = InfoSource::NotInPrompt;
    Language language = Language::EN;

    // Value of one attribute axis as a small integer, used for agreement tests.
    int value_of(Attribute a) const;

    friend bool operator==(const TaskAttributes &, const TaskAttributes &) = default;
};

std::string_view to_string(Concept c);
std::string_view to_string(QuestionType q);
std::string_view to_string(ResponseType r);
std::string_view to_string(InfoSource s);
std::string_view to_string(Language l);
std::string_view to_string(Attribute a);

// Inverse of to_string; throw std::invalid_argument on unknown names.
Concept parse_concept(std::string_view s);
QuestionType parse_question_type(std::string_view s);
ResponseType parse_response_type(std::string_view s);
InfoSource parse_info_source(std::string_view s);
Language parse_language(std::string_view s);
Attribute parse_attribute(std::string_view s);

} // namespace conceptscope

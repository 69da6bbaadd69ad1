#pragma once

#include "conceptscope/attributes.hpp"
#include "conceptscope/lexicon.hpp"
#include "conceptscope/rng.hpp"
#include "conceptscope/vocab.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace conceptscope {

class TaskError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class PromptFormat { Arrow, QA };

std::string_view to_string(PromptFormat f);
PromptFormat parse_format(std::string_view s);

// One demonstration. `input` may hold several space-separated tokens (abstract
// sequences); `output` is always a single token. Multiple-choice items carry
// their option words, labelled a, b, c, ... in order.
struct ExemplarPair {
    std::string input;
    std::string output;
    std::vector<std::string> options;

    friend bool operator==(const ExemplarPair &, const ExemplarPair &) = default;
};

struct PromptInstance {
    std::string dataset;
    std::string source_lexicon; // empty for list/abstract/letter-string tasks
    PromptFormat format = PromptFormat::Arrow;
    std::vector<std::string> preamble; // tokens shown before the exemplars
    std::vector<ExemplarPair> exemplars;
    std::string query;
    std::vector<std::string> query_options;
    std::string target;
    // AmbiguousICL: {primary-concept continuation, secondary-concept continuation}.
    std::vector<std::string> alt_targets;
    TaskAttributes attributes;
    std::optional<Concept> second_concept;
    std::vector<TokenId> rendered;

    std::size_t shots() const { return exemplars.size(); }
    friend bool operator==(const PromptInstance &, const PromptInstance &) = default;
};

inline constexpr std::size_t kDefaultShots = 5;
inline constexpr std::size_t kDefaultPrompts = 50;
inline constexpr std::size_t kMcOptions = 4;
inline constexpr std::size_t kAmbiguousShots = 10;

const std::vector<std::string> & option_labels();

// --- generators -----------------------------------------------------------

// `overlap_weight` scales how often entries from the overlap subset are drawn
// as the query.
std::vector<PromptInstance> gen_verbal_prompts(const Lexicon & lexicon, std::size_t shots, std::size_t n_prompts,
                                               Split split, std::uint64_t seed, double overlap_weight = 1.0);

// Converts an open-ended word prompt into labelled multiple choice; distractors
// are other outputs of `lexicon` in `split`.
PromptInstance to_multiple_choice(const PromptInstance & p, const Lexicon & lexicon, Split split,
                                  std::size_t n_options, std::uint64_t seed);

enum class Direction { Previous, Next };
enum class AbstractVariant { Letter, Word };
enum class AlphabetKind { Latin, Symbolic };

std::string_view to_string(Direction d);

// Cyclic successor/predecessor across the built-in ordered lists.
std::string list_step(const std::string & item, Direction d);
bool in_ordered_list(const std::string & item);

std::vector<PromptInstance> gen_list_prevnext(Direction direction, std::size_t n_prompts, std::size_t shots,
                                              std::uint64_t seed);

// One abstract line: `indicator`, `n_positional` dots and `m_distractors + 1`
// target-class elements in shuffled order, with the answer.
struct AbstractLine {
    std::vector<std::string> elements;
    std::string answer;
};

AbstractLine make_abstract_line(Direction direction, const std::vector<std::string> & target_class,
                                std::size_t m_distractors, std::size_t n_positional, Rng & rng);

std::vector<PromptInstance> gen_abstract_prevnext(Direction direction, AbstractVariant variant,
                                                  std::size_t m_distractors, std::size_t n_positional,
                                                  std::size_t n_prompts, std::size_t shots, std::uint64_t seed,
                                                  const World & world);

std::vector<PromptInstance> gen_ambiguous_icl(const Lexicon & lex_a, const Lexicon & lex_b, std::size_t shots,
                                              std::size_t n_prompts, Split split, std::uint64_t seed);

// Alphabet after `n_perm` random transpositions of the canonical order.
std::vector<std::string> permuted_alphabet(std::size_t n_perm, AlphabetKind kind, std::uint64_t seed);

std::vector<PromptInstance> gen_letter_string(std::size_t n_perm, AlphabetKind kind, std::size_t n_prompts,
                                              std::uint64_t seed);

// Letter-string datasets reported in the accuracy table, as (label, n_perm, kind).
struct LetterStringSetting {
    std::string label;
    std::size_t n_perm;
    AlphabetKind kind;
    double chance;
};
const std::vector<LetterStringSetting> & letter_string_settings();

// --- rendering ------------------------------------------------------------

std::vector<std::string> render_tokens(const PromptInstance & p, PromptFormat format);
std::vector<std::string> render_tokens(const PromptInstance & p);
std::vector<TokenId> render_prompt(const PromptInstance & p, PromptFormat format, const Vocabulary & vocab);
std::vector<TokenId> render_prompt(const PromptInstance & p, const Vocabulary & vocab);
std::string render_text(const PromptInstance & p);

// Fills `rendered` on every prompt.
void attach_rendering(std::vector<PromptInstance> & prompts, const Vocabulary & vocab);

// Replaces every exemplar input with unrelated content words. Outputs, options
// and the query are untouched.
PromptInstance corrupt_prompt(const PromptInstance & p, const World & world, std::uint64_t seed);

// --- evaluation dataset table ------------------------------------------------

struct DatasetSpec {
    std::string name;
    TaskAttributes attributes;
    bool verbal = true;
};

// The fifteen evaluation datasets, in table order.
const std::vector<DatasetSpec> & dataset_table();
const DatasetSpec & dataset_spec(const std::string & name);
std::vector<std::string> verbal_dataset_names();
std::vector<std::string> abstract_dataset_names();

struct Dataset {
    std::string name;
    std::vector<PromptInstance> prompts;
};

// Builds one evaluation dataset (test split for lexical tasks), rendered.
Dataset build_dataset(const World & world, const Vocabulary & vocab, const std::string & name, std::size_t shots,
                      std::size_t n_prompts, std::uint64_t seed);

// --- serialization ----------------------------------------------------------

nlohmann::json to_json(const PromptInstance & p);
PromptInstance prompt_from_json(const nlohmann::json & j);

void write_jsonl(const std::string & path, const std::vector<PromptInstance> & prompts);
std::vector<PromptInstance> read_jsonl(const std::string & path);

} // namespace conceptscope

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mkg/error.hpp"

namespace mkg {

struct AnswerOption {
    char label;  // 'A'..'Z'
    std::string text;
};

/// A multiple-choice item: stem, labeled options, optional gold label.
struct Question {
    std::string id;
    std::string stem;
    std::vector<AnswerOption> options;
    std::optional<char> gold;
    std::string language;  // "ja", "zh", "ko", "sw", "en", ...

    std::vector<char> labels() const;
};

/// Throws InvalidQuestion unless labels run A, B, C... without gaps and the
/// stem has visible content. A gold label must name an existing option.
void validate(const Question& q);

/// "A) text" lines, one per option.
std::string format_options(const Question& q);

struct EntityOrigin {
    enum class Kind { Stem, Option };
    Kind kind = Kind::Stem;
    char label = 0;  // meaningful for Kind::Option only

    static EntityOrigin stem() { return {}; }
    static EntityOrigin option(char l) { return {Kind::Option, l}; }

    bool is_stem() const { return kind == Kind::Stem; }
    friend bool operator==(const EntityOrigin&, const EntityOrigin&) = default;
};

struct MedicalEntity {
    std::string surface;  // source-language form
    std::string english;  // translated retrieval form
    EntityOrigin origin;
};

struct Triple {
    std::string subject;
    std::string relation;
    std::string object;
    std::string entity_key;
    std::string language;

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct KnowledgeGraph {
    std::string entity_key;
    std::vector<Triple> triples;  // retrieval order
};

struct ScoredTriple {
    Triple triple;
    double embed_score = 0.0;
    std::optional<double> cross_score;
    // Tie-break keys: index of the source graph in the retrieval list, then
    // position of the triple inside that graph.
    std::size_t graph_index = 0;
    std::size_t position = 0;
};

struct RankedKnowledge {
    std::vector<ScoredTriple> items;
    bool valid = false;
};

struct StatementSet {
    std::vector<std::string> statements;
    std::string language;
};

struct Answer {
    std::optional<char> label;  // empty means Uncertain
    std::string raw;

    bool uncertain() const { return !label.has_value(); }
    /// "B" or "Uncertain".
    std::string choice_string() const;
};

/// NFKC case folding, whitespace runs collapsed to one space, trimmed.
/// Throws InvalidEntity when nothing remains.
std::string normalize_entity_key(std::string_view english);

/// "subject relation object".
std::string triple_to_text(const Triple& t);

} // namespace mkg

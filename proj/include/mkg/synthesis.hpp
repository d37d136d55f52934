#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/llm_gateway.hpp"

namespace mkg {

/// True iff there are items and the best cross score reaches `threshold`
/// (inclusive). Writes the verdict into `ranked.valid`.
bool is_retrieval_valid(RankedKnowledge& ranked, double threshold);

/// Triple texts of the ranked items, used when conversion is skipped or fails.
StatementSet raw_statements(const RankedKnowledge& ranked, std::string language);

/// One DeclarativeConvert call over all ranked triples; one statement per
/// non-blank reply line. Requires `ranked.valid` (ContractViolation otherwise);
/// throws ConversionEmpty when the reply has no statement.
StatementSet declarative_convert(const Question& q, const RankedKnowledge& ranked,
                                 std::string_view preferred_language, const LlmGateway& llm);

/// "- statement" lines, the {knowledge} binding of the reasoning prompt.
std::string format_knowledge(const StatementSet& statements);

/// Final reasoning over question, options and statements.
Answer answer(const Question& q, const StatementSet& statements, const LlmGateway& llm);

/// Zero-shot reasoning with an empty knowledge section, for base runs.
Answer answer_without_knowledge(const Question& q, const LlmGateway& llm);

/// Standalone option letters (case-insensitive, not adjacent to another ASCII
/// letter, digit or underscore) restricted to `valid_labels`. Exactly one
/// distinct letter gives that label; none or several give Uncertain.
Answer parse_answer(std::string_view completion, const std::vector<char>& valid_labels);

} // namespace mkg

#include "mkg/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>
#include <sstream>

#include "mkg/text.hpp"

namespace mkg {

bool is_retrieval_valid(RankedKnowledge& ranked, double threshold) {
    bool valid = false;
    if (!ranked.items.empty()) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& item : ranked.items) {
            if (item.cross_score) best = std::max(best, *item.cross_score);
        }
        valid = best >= threshold;
    }
    ranked.valid = valid;
    return valid;
}

StatementSet raw_statements(const RankedKnowledge& ranked, std::string language) {
    StatementSet s;
    s.language = std::move(language);
    for (const auto& item : ranked.items) s.statements.push_back(triple_to_text(item.triple));
    return s;
}

StatementSet declarative_convert(const Question& q, const RankedKnowledge& ranked,
                                 std::string_view preferred_language, const LlmGateway& llm) {
    if (!ranked.valid || ranked.items.empty()) {
        throw Error(ErrorCode::ContractViolation, "declarative_convert needs valid, non-empty knowledge");
    }
    std::string triples;
    for (const auto& item : ranked.items) {
        triples += triple_to_text(item.triple);
        triples += '\n';
    }
    std::string reply = llm.run(TemplateId::DeclarativeConvert, {{"question", q.stem},
                                                                 {"options", format_options(q)},
                                                                 {"knowledge", triples},
                                                                 {"language", std::string(preferred_language)}});
    StatementSet out;
    out.language = std::string(preferred_language);
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = text::trim(line);
        if (!t.empty()) out.statements.push_back(std::move(t));
    }
    if (out.statements.empty()) {
        throw Error(ErrorCode::ConversionEmpty, "declarative conversion returned no statements", reply);
    }
    return out;
}

std::string format_knowledge(const StatementSet& statements) {
    std::string out;
    for (const auto& s : statements.statements) {
        if (!out.empty()) out += '\n';
        out += "- ";
        out += s;
    }
    return out;
}

Answer answer(const Question& q, const StatementSet& statements, const LlmGateway& llm) {
    if (statements.statements.empty()) {
        throw Error(ErrorCode::ContractViolation, "answer needs at least one statement");
    }
    std::string reply = llm.run(TemplateId::FinalReasoning, {{"question", q.stem},
                                                             {"options", format_options(q)},
                                                             {"knowledge", format_knowledge(statements)}});
    return parse_answer(reply, q.labels());
}

Answer answer_without_knowledge(const Question& q, const LlmGateway& llm) {
    std::string reply = llm.run(TemplateId::FinalReasoning,
                                {{"question", q.stem}, {"options", format_options(q)}, {"knowledge", "(none)"}});
    return parse_answer(reply, q.labels());
}

Answer parse_answer(std::string_view completion, const std::vector<char>& valid_labels) {
    auto word_char = [](char c) {
        auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '_';
    };
    std::set<char> found;
    for (std::size_t i = 0; i < completion.size(); ++i) {
        char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(completion[i])));
        if (upper < 'A' || upper > 'Z') continue;
        if (i > 0 && word_char(completion[i - 1])) continue;
        if (i + 1 < completion.size() && word_char(completion[i + 1])) continue;
        if (std::find(valid_labels.begin(), valid_labels.end(), upper) != valid_labels.end()) {
            found.insert(upper);
        }
    }
    Answer a;
    a.raw = std::string(completion);
    if (found.size() == 1) a.label = *found.begin();
    return a;
}

} // namespace mkg

#include "mkg/core.hpp"

#include <set>

#include "mkg/text.hpp"

namespace mkg {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidEntity: return "InvalidEntity";
    case ErrorCode::InvalidQuestion: return "InvalidQuestion";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MockScriptExhausted: return "MockScriptExhausted";
    case ErrorCode::ExtractionParseError: return "ExtractionParseError";
    case ErrorCode::NoUsableEntities: return "NoUsableEntities";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::RemoteProtocolError: return "RemoteProtocolError";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::SelfKnowledgeEmpty: return "SelfKnowledgeEmpty";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ConversionEmpty: return "ConversionEmpty";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::PredictionGoldMismatch: return "PredictionGoldMismatch";
    case ErrorCode::IncomparableRuns: return "IncomparableRuns";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

std::vector<char> Question::labels() const {
    std::vector<char> out;
    out.reserve(options.size());
    for (const auto& o : options) out.push_back(o.label);
    return out;
}

void validate(const Question& q) {
    if (text::trim(q.stem).empty()) {
        throw Error(ErrorCode::InvalidQuestion, "question '" + q.id + "' has an empty stem");
    }
    if (q.options.size() > 26) {
        throw Error(ErrorCode::InvalidQuestion, "question '" + q.id + "' has more than 26 options");
    }
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        char expected = static_cast<char>('A' + i);
        if (q.options[i].label != expected) {
            throw Error(ErrorCode::InvalidQuestion,
                        "question '" + q.id + "': option " + std::to_string(i) + " is labeled '" +
                            std::string(1, q.options[i].label) + "', expected '" + expected + "'");
        }
    }
    if (q.gold) {
        char g = *q.gold;
        if (g < 'A' || static_cast<std::size_t>(g - 'A') >= q.options.size()) {
            throw Error(ErrorCode::InvalidQuestion,
                        "question '" + q.id + "': gold label '" + std::string(1, g) + "' is not an option");
        }
    }
}

std::string format_options(const Question& q) {
    std::string out;
    for (const auto& o : q.options) {
        if (!out.empty()) out.push_back('\n');
        out.push_back(o.label);
        out += ") ";
        out += o.text;
    }
    return out;
}

std::string Answer::choice_string() const {
    return label ? std::string(1, *label) : std::string("Uncertain");
}

std::string normalize_entity_key(std::string_view english) {
    // Fold first: NFKC can turn compatibility spaces (e.g. U+3000) into ASCII.
    std::string key = text::collapse_whitespace(text::nfkc_casefold(english));
    if (key.empty()) {
        throw Error(ErrorCode::InvalidEntity, "entity text is empty after normalization");
    }
    return key;
}

std::string triple_to_text(const Triple& t) {
    std::string out;
    out.reserve(t.subject.size() + t.relation.size() + t.object.size() + 2);
    out += t.subject;
    out += ' ';
    out += t.relation;
    out += ' ';
    out += t.object;
    return out;
}

} // namespace mkg

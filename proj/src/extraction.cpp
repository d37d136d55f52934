#include "mkg/extraction.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mkg/text.hpp"

namespace mkg {
namespace {

std::vector<std::string> nonblank_lines(std::string_view reply) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(reply)};
    std::string line;
    while (std::getline(in, line)) {
        std::string t = text::trim(line);
        if (!t.empty()) lines.push_back(std::move(t));
    }
    return lines;
}

bool is_none_marker(std::string_view line) {
    std::string folded = text::nfkc_casefold(line);
    while (!folded.empty() && (folded.back() == '.' || folded.back() == ' ')) folded.pop_back();
    return folded == "none" || folded == "n/a";
}

// "- x", "* x", "• x", "1. x", "2) x"
std::string strip_bullet(const std::string& line) {
    std::size_t i = 0;
    if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
        i = 2;
    } else if (line.rfind("\xE2\x80\xA2", 0) == 0) {  // U+2022
        i = 3;
    } else {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
            ++i;
        } else {
            i = 0;
        }
    }
    return text::trim(std::string_view(line).substr(i));
}

struct Pair {
    std::string surface;
    std::string english;
};

std::optional<Pair> parse_pair(std::string_view s) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto bar = s.find('|', start);
        fields.push_back(text::trim(s.substr(start, bar == std::string_view::npos ? s.npos : bar - start)));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    if (fields.size() > 2 || fields[0].empty()) return std::nullopt;
    return Pair{fields[0], fields.size() == 2 ? fields[1] : std::string()};
}

[[noreturn]] void parse_failure(const std::string& what, std::string_view reply) {
    throw Error(ErrorCode::ExtractionParseError, what, std::string(reply));
}

} // namespace

std::vector<MedicalEntity> parse_stem_entities(std::string_view reply) {
    std::vector<MedicalEntity> out;
    auto lines = nonblank_lines(reply);
    if (lines.size() == 1 && is_none_marker(lines[0])) return out;
    for (const auto& line : lines) {
        auto pair = parse_pair(strip_bullet(line));
        if (!pair) continue;
        out.push_back({pair->surface, pair->english, EntityOrigin::stem()});
    }
    if (out.empty() && !lines.empty()) {
        parse_failure("stem extraction reply has no parseable entity line", reply);
    }
    return out;
}

std::vector<MedicalEntity> parse_option_entities(std::string_view reply, const std::vector<char>& labels) {
    std::vector<MedicalEntity> out;
    auto lines = nonblank_lines(reply);
    if (lines.size() == 1 && is_none_marker(lines[0])) return out;
    std::size_t parsed_lines = 0;
    for (const auto& raw : lines) {
        std::string line = strip_bullet(raw);
        // "A: x", "A) x", "A. x", "(A) x"
        std::size_t i = 0;
        if (!line.empty() && line[0] == '(') i = 1;
        if (i >= line.size()) continue;
        char label = static_cast<char>(std::toupper(static_cast<unsigned char>(line[i])));
        if (label < 'A' || label > 'Z' || i + 1 >= line.size()) continue;
        char sep = line[i + 1];
        if (sep != ':' && sep != ')' && sep != '.') continue;
        auto pair = parse_pair(std::string_view(line).substr(i + 2));
        if (!pair) continue;
        ++parsed_lines;
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) continue;
        out.push_back({pair->surface, pair->english, EntityOrigin::option(label)});
    }
    if (parsed_lines == 0 && !lines.empty()) {
        parse_failure("option extraction reply has no parseable 'X: entity' line", reply);
    }
    return out;
}

std::vector<MedicalEntity> enforce_entity_caps(std::vector<MedicalEntity> entities) {
    std::vector<MedicalEntity> kept;
    std::set<std::string> seen;
    std::size_t stem_count = 0;
    std::map<char, std::size_t> per_option;
    for (auto& e : entities) {
        std::string key;
        try {
            key = normalize_entity_key(e.surface);
        } catch (const Error&) {
            continue;
        }
        if (seen.count(key)) continue;
        if (e.origin.is_stem()) {
            if (stem_count >= kMaxStemEntities) continue;
            ++stem_count;
        } else {
            auto& n = per_option[e.origin.label];
            if (n >= kMaxEntitiesPerOption) continue;
            ++n;
        }
        seen.insert(std::move(key));
        kept.push_back(std::move(e));
    }
    return kept;
}

std::vector<MedicalEntity> extract_entities(const Question& q, const LlmGateway& llm) {
    std::vector<MedicalEntity> all = parse_stem_entities(llm.run(
        TemplateId::ExtractFromQuestion,
        {{"question", q.stem}, {"language", q.language}, {"max_entities", std::to_string(kMaxStemEntities)}}));
    if (!q.options.empty()) {
        auto from_options = parse_option_entities(
            llm.run(TemplateId::ExtractFromOptions, {{"options", format_options(q)}, {"language", q.language}}),
            q.labels());
        all.insert(all.end(), std::make_move_iterator(from_options.begin()),
                   std::make_move_iterator(from_options.end()));
    }
    return enforce_entity_caps(std::move(all));
}

std::vector<MedicalEntity> translate_entities(std::vector<MedicalEntity> entities, std::string_view language) {
    const bool english_source = language == "en" || language.rfind("en-", 0) == 0;
    std::vector<MedicalEntity> out;
    std::set<std::string> seen;
    for (auto& e : entities) {
        std::string english = text::trim(e.english);
        if (english.empty() && english_source) english = text::trim(e.surface);
        if (english.empty()) {
            spdlog::warn("dropping entity '{}': no English translation", e.surface);
            continue;
        }
        // Two surfaces may translate to one term; retrieval needs it once.
        if (!seen.insert(normalize_entity_key(english)).second) continue;
        e.english = std::move(english);
        out.push_back(std::move(e));
    }
    if (out.empty() && !entities.empty()) {
        throw Error(ErrorCode::NoUsableEntities, "no extracted entity has an English translation");
    }
    return out;
}

} // namespace mkg

#pragma once

#include <string_view>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/llm_gateway.hpp"

namespace mkg {

inline constexpr std::size_t kMaxStemEntities = 3;
inline constexpr std::size_t kMaxEntitiesPerOption = 1;

/// Parses the stem-extraction reply: one "surface | english" per line (the
/// translation half may be missing). List bullets and numbering are tolerated;
/// "NONE" or blank output means no entities.
std::vector<MedicalEntity> parse_stem_entities(std::string_view reply);

/// Parses the option-extraction reply: "X: surface | english" per line. Lines
/// for labels outside `labels` are ignored.
std::vector<MedicalEntity> parse_option_entities(std::string_view reply, const std::vector<char>& labels);

/// Applies the caps (3 from the stem, 1 per option) in listed order after
/// removing duplicates by normalized surface.
std::vector<MedicalEntity> enforce_entity_caps(std::vector<MedicalEntity> entities);

/// Asks the model for stem and option entities. Each entity carries the
/// model's paired English term in `english` (possibly empty until
/// translate_entities runs). Throws ExtractionParseError with the raw reply.
std::vector<MedicalEntity> extract_entities(const Question& q, const LlmGateway& llm);

/// Finalizes English forms: keeps the paired translation, passes English
/// surfaces through unchanged when the source language is English, and drops
/// entities left without a translation. Throws NoUsableEntities when nothing
/// survives out of a non-empty input.
std::vector<MedicalEntity> translate_entities(std::vector<MedicalEntity> entities, std::string_view language);

} // namespace mkg

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 text utilities shared by key normalization, tokenization and chunking.
namespace mkg::text {

/// Unicode NFKC_Casefold of a UTF-8 string.
std::string nfkc_casefold(std::string_view s);

/// Leading/trailing Unicode whitespace removed.
std::string trim(std::string_view s);

/// Runs of Unicode whitespace replaced by a single ASCII space, then trimmed.
std::string collapse_whitespace(std::string_view s);

/// Word tokens per Unicode word segmentation, case folded. Punctuation and
/// whitespace segments are dropped.
std::vector<std::string> tokenize_words(std::string_view s);

struct Span {
    std::size_t begin;
    std::size_t end;  // exclusive, byte offsets
};

/// Sentence spans ending at ., ?, ! (followed by whitespace or end of text) or
/// at the full-width terminals 。？！. Each span includes its terminal run and
/// excludes surrounding whitespace. Text with no terminal yields one span.
std::vector<Span> split_sentences(std::string_view s);

std::size_t codepoint_count(std::string_view s);

/// 64-bit FNV-1a over the raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace mkg::text

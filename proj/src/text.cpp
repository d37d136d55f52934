#include "mkg/text.hpp"

#include <memory>
#include <mutex>
#include <stdexcept>

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace mkg::text {
namespace {

icu::UnicodeString to_unicode(std::string_view s) {
    return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string to_utf8(const icu::UnicodeString& u) {
    std::string out;
    u.toUTF8String(out);
    return out;
}

const icu::Normalizer2& casefolder() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCCasefoldInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
        throw std::runtime_error("ICU NFKC_Casefold normalizer unavailable");
    }
    return *n;
}

// BreakIterator instances are not thread-safe; each thread clones its own.
icu::BreakIterator& word_breaker() {
    thread_local std::unique_ptr<icu::BreakIterator> it = [] {
        UErrorCode status = U_ZERO_ERROR;
        std::unique_ptr<icu::BreakIterator> bi(
            icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
        if (U_FAILURE(status)) {
            throw std::runtime_error("ICU word break iterator unavailable");
        }
        return bi;
    }();
    return *it;
}

UChar32 decode_at(std::string_view s, std::size_t& i) {
    UChar32 c = 0;
    int32_t pos = static_cast<int32_t>(i);
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos, static_cast<int32_t>(s.size()), c);
    i = static_cast<std::size_t>(pos);
    return c;
}

bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

} // namespace

std::string nfkc_casefold(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString out = casefolder().normalize(to_unicode(s), status);
    if (U_FAILURE(status)) {
        throw std::runtime_error("NFKC_Casefold failed");
    }
    return to_utf8(out);
}

std::string trim(std::string_view s) {
    std::size_t first = s.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t start = i;
        UChar32 c = decode_at(s, i);
        if (!is_space(c)) {
            if (first == s.size()) first = start;
            last = i;
        }
    }
    if (first == s.size()) return {};
    return std::string(s.substr(first, last - first));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t start = i;
        UChar32 c = decode_at(s, i);
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(s.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> tokenize_words(std::string_view s) {
    std::vector<std::string> tokens;
    if (s.empty()) return tokens;
    icu::UnicodeString u = to_unicode(s);
    icu::BreakIterator& bi = word_breaker();
    bi.setText(u);
    int32_t start = bi.first();
    for (int32_t end = bi.next(); end != icu::BreakIterator::DONE; start = end, end = bi.next()) {
        if (bi.getRuleStatus() == UBRK_WORD_NONE) continue;
        icu::UnicodeString piece(u, start, end - start);
        tokens.push_back(nfkc_casefold(to_utf8(piece)));
    }
    return tokens;
}

std::vector<Span> split_sentences(std::string_view s) {
    auto is_ascii_terminal = [](UChar32 c) { return c == '.' || c == '?' || c == '!'; };
    auto is_wide_terminal = [](UChar32 c) { return c == 0x3002 || c == 0xFF1F || c == 0xFF01; };

    std::vector<Span> spans;
    std::size_t sentence_start = 0;
    auto emit = [&](std::size_t end) {
        std::string_view piece = s.substr(sentence_start, end - sentence_start);
        std::string trimmed = trim(piece);
        if (!trimmed.empty()) {
            std::size_t offset = sentence_start + piece.find(trimmed);
            spans.push_back({offset, offset + trimmed.size()});
        }
        sentence_start = end;
    };

    for (std::size_t i = 0; i < s.size();) {
        UChar32 c = decode_at(s, i);
        if (!is_ascii_terminal(c) && !is_wide_terminal(c)) continue;
        bool wide = is_wide_terminal(c);
        // absorb the whole terminal run ("?!", "...", "。。")
        std::size_t run_end = i;
        while (run_end < s.size()) {
            std::size_t next = run_end;
            UChar32 d = decode_at(s, next);
            if (!is_ascii_terminal(d) && !is_wide_terminal(d)) break;
            wide = wide || is_wide_terminal(d);
            run_end = next;
        }
        bool boundary = wide || run_end == s.size();
        if (!boundary) {
            std::size_t peek = run_end;
            boundary = is_space(decode_at(s, peek));
        }
        i = run_end;
        if (boundary) emit(run_end);
    }
    if (sentence_start < s.size()) emit(s.size());
    if (spans.empty()) {
        std::string trimmed = trim(s);
        if (!trimmed.empty()) {
            std::size_t offset = s.find(trimmed);
            spans.push_back({offset, offset + trimmed.size()});
        }
    }
    return spans;
}

std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size();) {
        decode_at(s, i);
        ++n;
    }
    return n;
}

} // namespace mkg::text

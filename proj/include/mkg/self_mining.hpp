#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/llm_gateway.hpp"

namespace mkg {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
    double idf_epsilon = 0.25;
};

struct Chunk {
    std::string text;
    std::size_t index = 0;
    std::size_t token_count = 0;
};

struct ScoredChunk {
    Chunk chunk;
    double score = 0.0;
};

/// Asks the model for background knowledge on the question. Throws
/// SelfKnowledgeEmpty on a blank reply.
std::string generate_self_knowledge(const Question& q, const LlmGateway& llm, std::string_view language);

/// Groups sentences into consecutive, non-overlapping windows of `window`
/// sentences; the last window may be short. Each chunk is the original text
/// from its first sentence's start to its last sentence's end.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t window = 3);

/// Okapi BM25 over a small in-memory corpus.
///
///   score(D, Q) = sum over query tokens t of
///                 idf(t) * f(t,D) * (k1 + 1) / (f(t,D) + k1 * (1 - b + b * |D| / avgdl))
///   idf(t)      = ln((N - n_t + 0.5) / (n_t + 0.5))
///
/// Negative idf values are replaced by idf_epsilon times the mean of the
/// positive idf values (0 when there are none), so scores never go negative.
/// Repeated query tokens count once per occurrence.
class Bm25Index {
public:
    Bm25Index(std::vector<std::vector<std::string>> documents, Bm25Params params = {});

    double idf(const std::string& term) const;
    double score(const std::vector<std::string>& query, std::size_t doc) const;
    std::vector<double> scores(const std::vector<std::string>& query) const;

    std::size_t size() const { return docs_.size(); }
    double average_length() const { return avgdl_; }

private:
    struct Doc {
        std::unordered_map<std::string, std::size_t> tf;
        std::size_t length = 0;
    };
    Bm25Params params_;
    std::vector<Doc> docs_;
    std::unordered_map<std::string, double> idf_;
    double avgdl_ = 0.0;
};

/// Tokenizes query and chunks, scores with Bm25Index, returns the best
/// `top_n` sorted by score then chunk index. Throws EmptyCorpus.
std::vector<ScoredChunk> bm25_rank(std::string_view query, const std::vector<Chunk>& chunks,
                                   const Bm25Params& params = {}, std::size_t top_n = 3);

} // namespace mkg

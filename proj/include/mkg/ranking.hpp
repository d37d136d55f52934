#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/http.hpp"

namespace mkg {

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws ZeroVector if either
/// norm is zero and ContractViolation on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One vector per text; all of equal length and finite.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

class CrossScorer {
public:
    virtual ~CrossScorer() = default;
    /// One finite relevance score per (query, document) pair.
    virtual std::vector<double> score(const std::vector<std::pair<std::string, std::string>>& pairs) = 0;
};

/// Term-frequency vector over word tokens, feature-hashed (FNV-1a) into
/// `dimension` buckets and L2-normalized. A text without tokens embeds to zero.
class HashingEmbedder : public Embedder {
public:
    static constexpr std::size_t kDefaultDimension = 64;
    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::vector<double> embed_one(const std::string& text) const;

private:
    std::size_t dimension_;
};

/// Jaccard overlap of the two sides' token sets.
class JaccardCrossScorer : public CrossScorer {
public:
    std::vector<double> score(const std::vector<std::pair<std::string, std::string>>& pairs) override;
    static double jaccard(const std::string& a, const std::string& b);
};

/// POST {texts: [...]} -> {vectors: [[...]]}
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::string url, RetryPolicy retry = {});
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    Endpoint endpoint_;
    RetryPolicy retry_;
};

/// POST {pairs: [[q, d], ...]} -> {scores: [...]}
class HttpCrossScorer : public CrossScorer {
public:
    HttpCrossScorer(std::string url, RetryPolicy retry = {});
    std::vector<double> score(const std::vector<std::pair<std::string, std::string>>& pairs) override;

private:
    Endpoint endpoint_;
    RetryPolicy retry_;
};

struct RankingOptions {
    std::size_t embed_top_k = 20;  // first stage width
    std::size_t cross_top_k = 10;  // second stage width
    double validity_threshold = 0.1;
};

/// Strict weak order used by both stages: higher score first, then lower
/// graph index, then lower position within the graph.
bool ranks_before(double score_a, const ScoredTriple& a, double score_b, const ScoredTriple& b);

/// Scores every triple by cosine(embed(stem), embed(triple text)), sorts, and
/// keeps the top `top_k`. Zero-norm embeddings score 0. Embedder failures
/// surface as ScorerUnavailable.
std::vector<ScoredTriple> embed_rank(const Question& q, const std::vector<KnowledgeGraph>& graphs,
                                     Embedder& embedder, std::size_t top_k);

/// Scores each triple against stem + options, re-sorts by that score, keeps
/// `top_k`, and marks the result valid per is_retrieval_valid.
RankedKnowledge cross_filter(const Question& q, const std::string& options_text,
                             std::vector<ScoredTriple> scored, CrossScorer& scorer, std::size_t top_k,
                             double validity_threshold);

} // namespace mkg

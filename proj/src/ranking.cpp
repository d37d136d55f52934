#include "mkg/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "http_internal.hpp"
#include "mkg/synthesis.hpp"
#include "mkg/text.hpp"

namespace mkg {

using nlohmann::json;

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorCode::ContractViolation, "cosine_similarity needs equal non-zero dimensions");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw Error(ErrorCode::ZeroVector, "cosine_similarity of a zero vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> HashingEmbedder::embed_one(const std::string& s) const {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& tok : text::tokenize_words(s)) {
        v[text::fnv1a64(tok) % dimension_] += 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<std::vector<double>> HashingEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

double JaccardCrossScorer::jaccard(const std::string& a, const std::string& b) {
    auto ta = text::tokenize_words(a);
    auto tb = text::tokenize_words(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::vector<double> JaccardCrossScorer::score(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [q, d] : pairs) out.push_back(jaccard(q, d));
    return out;
}

namespace {

json post_json(const Endpoint& endpoint, const RetryPolicy& retry, const json& body) {
    auto client = detail::make_client(endpoint, retry);
    const std::string path = endpoint.path_prefix.empty() ? "/" : endpoint.path_prefix;
    const std::string payload = body.dump();
    std::string response;
    try {
        response = detail::send_with_retries(
            retry, [&] { return client.Post(path, payload, "application/json"); }, ErrorCode::ScorerUnavailable,
            "scorer request to " + endpoint.origin + path);
        return json::parse(response);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, std::string("scorer response unreadable: ") + e.what());
    }
}

void require_finite(double x) {
    if (!std::isfinite(x)) throw Error(ErrorCode::ScorerUnavailable, "scorer returned a non-finite value");
}

} // namespace

HttpEmbedder::HttpEmbedder(std::string url, RetryPolicy retry)
    : endpoint_(Endpoint::parse(url)), retry_(std::move(retry)) {}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    json res = post_json(endpoint_, retry_, {{"texts", texts}});
    std::vector<std::vector<double>> vectors;
    try {
        vectors = res.at("vectors").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, std::string("embedder payload: ") + e.what());
    }
    if (vectors.size() != texts.size()) {
        throw Error(ErrorCode::ScorerUnavailable, "embedder returned the wrong number of vectors");
    }
    for (const auto& v : vectors) {
        if (v.size() != vectors.front().size()) {
            throw Error(ErrorCode::ScorerUnavailable, "embedder returned vectors of unequal length");
        }
        for (double x : v) require_finite(x);
    }
    return vectors;
}

HttpCrossScorer::HttpCrossScorer(std::string url, RetryPolicy retry)
    : endpoint_(Endpoint::parse(url)), retry_(std::move(retry)) {}

std::vector<double> HttpCrossScorer::score(const std::vector<std::pair<std::string, std::string>>& pairs) {
    json arr = json::array();
    for (const auto& [q, d] : pairs) arr.push_back({q, d});
    json res = post_json(endpoint_, retry_, {{"pairs", arr}});
    std::vector<double> scores;
    try {
        scores = res.at("scores").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, std::string("cross scorer payload: ") + e.what());
    }
    if (scores.size() != pairs.size()) {
        throw Error(ErrorCode::ScorerUnavailable, "cross scorer returned the wrong number of scores");
    }
    for (double x : scores) require_finite(x);
    return scores;
}

bool ranks_before(double score_a, const ScoredTriple& a, double score_b, const ScoredTriple& b) {
    if (score_a != score_b) return score_a > score_b;
    if (a.graph_index != b.graph_index) return a.graph_index < b.graph_index;
    return a.position < b.position;
}

std::vector<ScoredTriple> embed_rank(const Question& q, const std::vector<KnowledgeGraph>& graphs,
                                     Embedder& embedder, std::size_t top_k) {
    std::vector<ScoredTriple> scored;
    std::vector<std::string> texts{q.stem};
    for (std::size_t g = 0; g < graphs.size(); ++g) {
        for (std::size_t p = 0; p < graphs[g].triples.size(); ++p) {
            const Triple& t = graphs[g].triples[p];
            scored.push_back({t, 0.0, std::nullopt, g, p});
            texts.push_back(triple_to_text(t));
        }
    }
    if (scored.empty()) return scored;

    std::vector<std::vector<double>> vectors;
    try {
        vectors = embedder.embed(texts);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ScorerUnavailable) throw;
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    }
    if (vectors.size() != texts.size()) {
        throw Error(ErrorCode::ScorerUnavailable, "embedder returned the wrong number of vectors");
    }
    for (std::size_t i = 0; i < scored.size(); ++i) {
        try {
            scored[i].embed_score = cosine_similarity(vectors[0], vectors[i + 1]);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ZeroVector) throw;
            scored[i].embed_score = 0.0;
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredTriple& a, const ScoredTriple& b) {
        return ranks_before(a.embed_score, a, b.embed_score, b);
    });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

RankedKnowledge cross_filter(const Question& q, const std::string& options_text,
                             std::vector<ScoredTriple> scored, CrossScorer& scorer, std::size_t top_k,
                             double validity_threshold) {
    RankedKnowledge ranked;
    if (top_k == 0 || scored.empty()) {
        is_retrieval_valid(ranked, validity_threshold);
        return ranked;
    }
    const std::string query = options_text.empty() ? q.stem : q.stem + "\n" + options_text;
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(scored.size());
    for (const auto& s : scored) pairs.emplace_back(query, triple_to_text(s.triple));

    std::vector<double> scores;
    try {
        scores = scorer.score(pairs);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ScorerUnavailable) throw;
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ScorerUnavailable, e.what());
    }
    if (scores.size() != scored.size()) {
        throw Error(ErrorCode::ScorerUnavailable, "cross scorer returned the wrong number of scores");
    }
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw Error(ErrorCode::ScorerUnavailable, "cross scorer returned a non-finite value");
        }
        scored[i].cross_score = scores[i];
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredTriple& a, const ScoredTriple& b) {
        return ranks_before(*a.cross_score, a, *b.cross_score, b);
    });
    if (scored.size() > top_k) scored.resize(top_k);
    ranked.items = std::move(scored);
    is_retrieval_valid(ranked, validity_threshold);
    return ranked;
}

} // namespace mkg

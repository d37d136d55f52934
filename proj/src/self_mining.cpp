#include "mkg/self_mining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mkg/text.hpp"

namespace mkg {

std::string generate_self_knowledge(const Question& q, const LlmGateway& llm, std::string_view language) {
    std::string reply = llm.run(TemplateId::SelfMining, {{"question", q.stem},
                                                         {"options", format_options(q)},
                                                         {"language", std::string(language)}});
    if (text::trim(reply).empty()) {
        throw Error(ErrorCode::SelfKnowledgeEmpty, "self-knowledge reply for '" + q.id + "' is empty");
    }
    return reply;
}

std::vector<Chunk> chunk_text(std::string_view s, std::size_t window) {
    window = std::max<std::size_t>(window, 1);
    auto sentences = text::split_sentences(s);
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < sentences.size(); i += window) {
        std::size_t last = std::min(i + window, sentences.size()) - 1;
        Chunk c;
        c.text = std::string(s.substr(sentences[i].begin, sentences[last].end - sentences[i].begin));
        c.index = chunks.size();
        c.token_count = text::tokenize_words(c.text).size();
        chunks.push_back(std::move(c));
    }
    return chunks;
}

Bm25Index::Bm25Index(std::vector<std::vector<std::string>> documents, Bm25Params params)
    : params_(params) {
    if (documents.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "BM25 needs at least one document");
    }
    std::unordered_map<std::string, std::size_t> doc_freq;
    std::size_t total_length = 0;
    for (auto& tokens : documents) {
        Doc d;
        d.length = tokens.size();
        total_length += d.length;
        for (auto& t : tokens) ++d.tf[std::move(t)];
        for (const auto& [term, _] : d.tf) ++doc_freq[term];
        docs_.push_back(std::move(d));
    }
    const double n_docs = static_cast<double>(docs_.size());
    avgdl_ = static_cast<double>(total_length) / n_docs;

    double positive_sum = 0.0;
    std::size_t positive_count = 0;
    std::vector<std::string> negatives;
    for (const auto& [term, n] : doc_freq) {
        double v = std::log((n_docs - static_cast<double>(n) + 0.5) / (static_cast<double>(n) + 0.5));
        idf_[term] = v;
        if (v > 0.0) {
            positive_sum += v;
            ++positive_count;
        } else if (v < 0.0) {
            negatives.push_back(term);
        }
    }
    const double floor =
        positive_count == 0 ? 0.0 : params_.idf_epsilon * positive_sum / static_cast<double>(positive_count);
    for (const auto& term : negatives) idf_[term] = floor;
}

double Bm25Index::idf(const std::string& term) const {
    auto it = idf_.find(term);
    return it == idf_.end() ? 0.0 : it->second;
}

double Bm25Index::score(const std::vector<std::string>& query, std::size_t doc) const {
    const Doc& d = docs_.at(doc);
    const double norm = avgdl_ > 0.0 ? static_cast<double>(d.length) / avgdl_ : 0.0;
    double total = 0.0;
    for (const auto& term : query) {
        auto it = d.tf.find(term);
        if (it == d.tf.end()) continue;
        const double f = static_cast<double>(it->second);
        total += idf(term) * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
    return total;
}

std::vector<double> Bm25Index::scores(const std::vector<std::string>& query) const {
    std::vector<double> out(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) out[i] = score(query, i);
    return out;
}

std::vector<ScoredChunk> bm25_rank(std::string_view query, const std::vector<Chunk>& chunks,
                                   const Bm25Params& params, std::size_t top_n) {
    if (chunks.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "bm25_rank called with no chunks");
    }
    std::vector<std::vector<std::string>> docs;
    docs.reserve(chunks.size());
    for (const auto& c : chunks) docs.push_back(text::tokenize_words(c.text));
    Bm25Index index(std::move(docs), params);
    auto scores = index.scores(text::tokenize_words(query));

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return chunks[a].index < chunks[b].index;
    });
    if (order.size() > top_n) order.resize(top_n);

    std::vector<ScoredChunk> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.push_back({chunks[i], scores[i]});
    return out;
}

} // namespace mkg

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mkg/self_mining.hpp"
#include "test_support.hpp"

using namespace mkg;

namespace {

using Docs = std::vector<std::vector<std::string>>;

// Direct evaluation of the Okapi formula with the positive-mean idf floor.
double oracle_score(const Docs& docs, const std::vector<std::string>& query, std::size_t d, double k1, double b,
                    double eps) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
    const double avgdl = total_len / n;

    std::set<std::string> vocab;
    for (const auto& doc : docs) vocab.insert(doc.begin(), doc.end());
    std::map<std::string, double> idf;
    double pos_sum = 0;
    int pos_n = 0;
    for (const auto& term : vocab) {
        int df = 0;
        for (const auto& doc : docs) df += std::count(doc.begin(), doc.end(), term) > 0;
        idf[term] = std::log((n - df + 0.5) / (df + 0.5));
        if (idf[term] > 0) {
            pos_sum += idf[term];
            ++pos_n;
        }
    }
    const double floor = pos_n ? eps * pos_sum / pos_n : 0.0;
    for (auto& [_, v] : idf) {
        if (v < 0) v = floor;
    }

    double score = 0;
    for (const auto& term : query) {
        double f = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), term));
        if (f == 0) continue;
        double len = static_cast<double>(docs[d].size());
        score += idf[term] * f * (k1 + 1) / (f + k1 * (1 - b + b * len / avgdl));
    }
    return score;
}

std::vector<Chunk> chunks_of(const std::vector<std::string>& texts) {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({texts[i], i, 0});
    return out;
}

} // namespace

TEST(SelfKnowledge, PassageVerbatim) {
    const std::string passage = "Scurvy is a deficiency. It affects collagen. Gums bleed.";
    auto llm = test::mock_llm({{"self_mining", passage, {}}});
    auto q = test::make_question("坏血病？", {"A", "C"}, std::nullopt, "zh");
    EXPECT_EQ(generate_self_knowledge(q, *llm.gateway, "English"), passage);
    auto t = llm.backend->transcript();
    EXPECT_NE(t[0].rendered_prompt.find("坏血病？"), std::string::npos);
}

TEST(SelfKnowledge, BlankIsError) {
    auto llm = test::mock_llm({{"self_mining", "  \n", {}}});
    try {
        generate_self_knowledge(test::make_question("q", {}), *llm.gateway, "English");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SelfKnowledgeEmpty);
    }
}

TEST(Chunking, WindowArithmetic) {
    auto chunks = chunk_text("S1. S2. S3. S4. S5. S6. S7.", 3);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].text, "S1. S2. S3.");
    EXPECT_EQ(chunks[1].text, "S4. S5. S6.");
    EXPECT_EQ(chunks[2].text, "S7.");
    EXPECT_EQ(chunks[2].index, 2u);
    EXPECT_EQ(chunks[0].token_count, 3u);
}

TEST(Chunking, NoTerminalIsOneChunk) {
    auto chunks = chunk_text("vitamin c deficiency causes scurvy", 3);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].text, "vitamin c deficiency causes scurvy");
}

TEST(Chunking, CjkTerminals) {
    auto chunks = chunk_text("坏血病由缺乏维生素C引起。维生素C参与胶原合成。", 1);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, "坏血病由缺乏维生素C引起。");
}

TEST(Bm25, FeverExample) {
    auto ranked = bm25_rank("fever", chunks_of({"fever cough", "cough", "headache"}));
    ASSERT_EQ(ranked.size(), 3u);
    EXPECT_EQ(ranked[0].chunk.index, 0u);
    // idf(fever) = ln(2.5 / 1.5); |D| = 2, avgdl = 4/3
    const double expected = std::log(2.5 / 1.5) * 2.5 / (1 + 1.5 * (0.25 + 0.75 * 2 / (4.0 / 3.0)));
    EXPECT_NEAR(ranked[0].score, expected, 1e-12);
    EXPECT_EQ(ranked[1].score, 0.0);
    EXPECT_EQ(ranked[2].score, 0.0);
    EXPECT_EQ(ranked[1].chunk.index, 1u);
    EXPECT_EQ(ranked[2].chunk.index, 2u);
}

TEST(Bm25, NoOverlapKeepsChunkOrder) {
    auto ranked = bm25_rank("zzz", chunks_of({"a", "b", "c", "d"}), {}, 3);
    ASSERT_EQ(ranked.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(ranked[i].chunk.index, i);
        EXPECT_EQ(ranked[i].score, 0.0);
    }
}

TEST(Bm25, SingleChunkAlwaysReturned) {
    auto ranked = bm25_rank("nothing shared", chunks_of({"only chunk"}));
    ASSERT_EQ(ranked.size(), 1u);
}

TEST(Bm25, EmptyCorpusRejected) {
    try {
        bm25_rank("q", {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
    }
}

TEST(Bm25, NegativeIdfFlooredByPositiveMean) {
    // "a" appears in 3 of 4 docs: ln(1.5/3.5) < 0
    Bm25Index index({{"a", "x"}, {"a", "y"}, {"a"}, {"z"}});
    double pos = (std::log(3.5 / 1.5) * 3) / 3;
    EXPECT_NEAR(index.idf("a"), 0.25 * pos, 1e-12);
    EXPECT_EQ(index.idf("missing"), 0.0);
}

TEST(Bm25, AllNonPositiveIdfFloorsToZero) {
    Bm25Index index({{"a"}, {"a"}});
    EXPECT_EQ(index.idf("a"), 0.0);
}

TEST(Bm25Property, MatchesOracleOnRandomCorpora) {
    std::mt19937 rng(1234);
    const std::vector<std::string> vocab{"fever", "cough", "rash", "acid", "nerve", "pain", "bleed"};
    for (int trial = 0; trial < 200; ++trial) {
        Docs docs(1 + rng() % 10);
        for (auto& d : docs) {
            std::size_t len = rng() % 8;
            for (std::size_t i = 0; i < len; ++i) d.push_back(vocab[rng() % vocab.size()]);
        }
        std::vector<std::string> query(1 + rng() % 5);
        for (auto& t : query) t = vocab[rng() % vocab.size()];
        Bm25Index index(docs);
        for (std::size_t d = 0; d < docs.size(); ++d) {
            EXPECT_NEAR(index.score(query, d), oracle_score(docs, query, d, 1.5, 0.75, 0.25), 1e-9);
        }
    }
}

TEST(Bm25Property, NonNegativeAndMonotoneInTermFrequency) {
    std::mt19937 rng(77);
    const std::vector<std::string> vocab{"a", "b", "c", "d"};
    for (int trial = 0; trial < 200; ++trial) {
        Docs docs(2 + rng() % 6);
        for (auto& d : docs) {
            std::size_t len = 1 + rng() % 6;
            for (std::size_t i = 0; i < len; ++i) d.push_back(vocab[rng() % vocab.size()]);
        }
        const std::string term = vocab[rng() % vocab.size()];
        Bm25Index index(docs);
        for (std::size_t d = 0; d < docs.size(); ++d) EXPECT_GE(index.score({term}, d), 0.0);

        // Raising f(t, D) without changing |D| never lowers the score.
        std::size_t d = rng() % docs.size();
        auto it = std::find_if(docs[d].begin(), docs[d].end(), [&](const auto& w) { return w != term; });
        if (it == docs[d].end()) continue;
        double before = index.score({term}, d);
        Docs bumped = docs;
        bumped[d][static_cast<std::size_t>(it - docs[d].begin())] = term;
        // keep document frequencies fixed so idf does not move
        bool df_same = std::count(docs[d].begin(), docs[d].end(), term) > 0;
        if (!df_same) continue;
        Bm25Index after(bumped);
        if (after.idf(term) != index.idf(term)) continue;
        EXPECT_GE(after.score({term}, d) + 1e-12, before);
    }
}

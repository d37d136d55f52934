#include <gtest/gtest.h>

#include "mkg/config.hpp"
#include "test_support.hpp"

using namespace mkg;

TEST(Config, DefaultsMatchPipelineSettings) {
    Config c = parse_config("");
    EXPECT_EQ(c.ranking.embed_top_k, 20u);
    EXPECT_EQ(c.ranking.cross_top_k, 10u);
    EXPECT_DOUBLE_EQ(c.ranking.validity_threshold, 0.1);
    EXPECT_DOUBLE_EQ(c.bm25.k1, 1.5);
    EXPECT_DOUBLE_EQ(c.bm25.b, 0.75);
    EXPECT_DOUBLE_EQ(c.bm25.idf_epsilon, 0.25);
    EXPECT_EQ(c.chunk_window, 3u);
    EXPECT_FALSE(c.cache_ttl);
    EXPECT_TRUE(c.declarative);
}

TEST(Config, ParsesSectionsQuotesAndComments) {
    Config c = parse_config(R"(
# comment
[llm]
model = "gpt-4o"   # trailing
temperature = 0.2
[cache]
ttl_seconds = 3600
[ranking]
k1 = 15
tau = 0.25
[pipeline]
declarative = false
)");
    EXPECT_EQ(c.llm_model, "gpt-4o");
    EXPECT_DOUBLE_EQ(c.llm_temperature, 0.2);
    ASSERT_TRUE(c.cache_ttl);
    EXPECT_EQ(c.cache_ttl->count(), 3600);
    EXPECT_EQ(c.ranking.embed_top_k, 15u);
    EXPECT_DOUBLE_EQ(c.ranking.validity_threshold, 0.25);
    EXPECT_FALSE(c.declarative);
}

TEST(Config, UnknownKeyAndBadValueRejected) {
    EXPECT_THROW(parse_config("[llm]\nmodle = \"x\"\n"), Error);
    EXPECT_THROW(parse_config("[ranking]\nk1 = many\n"), Error);
    EXPECT_THROW(parse_config("[ranking\n"), Error);
}

TEST(Config, MissingFileNamesPath) {
    try {
        load_config("/no/such/mkg.toml");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
        EXPECT_NE(std::string(e.what()).find("/no/such/mkg.toml"), std::string::npos);
    }
}

TEST(Config, RelativePathsAnchorAtConfigFile) {
    test::TempDir dir;
    test::spit(dir / "mkg.toml", "[cache]\npath = \"kb/cache.jsonl\"\n[llm]\nmock_script = \"/abs/script.jsonl\"\n");
    Config c = load_config(dir / "mkg.toml");
    EXPECT_EQ(c.cache_path, dir / "kb/cache.jsonl");
    EXPECT_EQ(c.llm_mock_script, "/abs/script.jsonl");
}

TEST(Config, EngineNeedsAModel) {
    test::TempDir dir;
    Config c;
    c.cache_path = dir / "c.jsonl";
    EXPECT_THROW(build_engine(c), Error);
}

TEST(Config, OfflineEngineServesOnlyCachedKeys) {
    test::TempDir dir;
    test::spit(dir / "script.jsonl", "{\"response\":\"x\"}\n");
    Config c;
    c.cache_path = dir / "c.jsonl";
    c.llm_mock_script = (dir / "script.jsonl").string();
    Engine engine = build_engine(c);
    engine.cache->store("diplopia", {});
    auto out = engine.retriever->retrieve({{"diplopia", "diplopia", EntityOrigin::stem()},
                                           {"scurvy", "scurvy", EntityOrigin::stem()}});
    EXPECT_TRUE(out[0].from_cache);
    ASSERT_TRUE(out[1].error);
    EXPECT_EQ(out[1].error->code(), ErrorCode::RemoteUnavailable);
}

TEST(Config, ShippedExampleParses) {
    auto c = load_config(std::filesystem::path(MKG_SOURCE_DIR) / "config" / "mkg.example.toml");
    EXPECT_EQ(c.ranking.embed_top_k, 20u);
    EXPECT_EQ(c.ranking.cross_top_k, 10u);
    EXPECT_EQ(c.umls_base_url, "http://127.0.0.1:8765");
    EXPECT_EQ(c.cache_path, std::filesystem::path(MKG_SOURCE_DIR) / "config" / "mkg_cache.jsonl");
}

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "mkg/kg_retrieval.hpp"
#include "mkg/llm_gateway.hpp"
#include "mkg/pipeline.hpp"
#include "mkg/ranking.hpp"

namespace mkg {

/// Every tunable, read from a TOML-style file of `[section]` headers and
/// `key = value` lines.
struct Config {
    // [llm]
    std::string llm_endpoint;
    std::string llm_api_key_env = "MKG_LLM_API_KEY";
    std::string llm_model = "gpt-4o-mini";
    double llm_temperature = 0.0;
    int llm_max_tokens = 1024;
    std::string llm_response_pointer = "/choices/0/message/content";
    std::string llm_mock_script;  // set: replay scripted completions instead of calling a model
    std::string preferred_language = "English";
    RetryPolicy llm_retry;

    // [umls]
    std::string umls_base_url;
    std::string umls_api_key_env = "MKG_UMLS_API_KEY";
    std::string umls_search_path = "/search";
    std::string umls_relations_path = "/concepts/{id}/relations";
    std::size_t umls_max_triples = 50;
    std::ptrdiff_t umls_max_in_flight = 4;
    RetryPolicy umls_retry;

    // [cache]
    std::filesystem::path cache_path = "mkg_cache.jsonl";
    std::optional<std::chrono::seconds> cache_ttl;

    // [ranking]
    RankingOptions ranking;
    std::string embedder_url;
    std::string cross_scorer_url;

    // [bm25]
    Bm25Params bm25;
    std::size_t chunk_window = 3;
    std::size_t mining_top_n = 3;

    // [pipeline]
    std::size_t parallel = 4;
    bool declarative = true;

    // [templates]
    std::filesystem::path template_dir;
};

/// Throws ConfigError naming the line for syntax errors, unknown keys and
/// ill-typed values.
Config parse_config(std::string_view content);
/// Throws ConfigError naming the path when the file cannot be read.
Config load_config(const std::filesystem::path& path);

/// The wired-up engine a Config describes.
struct Engine {
    std::shared_ptr<LlmBackend> backend;
    std::shared_ptr<const LlmGateway> llm;
    std::shared_ptr<KnowledgeCache> cache;
    std::shared_ptr<KgRetriever> retriever;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<CrossScorer> cross_scorer;
    std::unique_ptr<Pipeline> pipeline;
};

Engine build_engine(const Config& config);

} // namespace mkg

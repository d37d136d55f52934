#include "mkg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mkg/text.hpp"

namespace mkg {
namespace {

[[noreturn]] void config_error(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line) + ": " + what);
}

// Strips a trailing comment and decodes a quoted string.
std::string parse_value(const std::string& raw, std::size_t line) {
    std::string v = text::trim(raw);
    if (!v.empty() && v.front() == '"') {
        std::string out;
        for (std::size_t i = 1; i < v.size(); ++i) {
            char c = v[i];
            if (c == '\\' && i + 1 < v.size()) {
                char n = v[++i];
                out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
            } else if (c == '"') {
                std::string rest = text::trim(std::string_view(v).substr(i + 1));
                if (!rest.empty() && rest.front() != '#') config_error(line, "text after closing quote");
                return out;
            } else {
                out.push_back(c);
            }
        }
        config_error(line, "unterminated string");
    }
    if (auto hash = v.find('#'); hash != std::string::npos) v = text::trim(std::string_view(v).substr(0, hash));
    return v;
}

double to_double(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        config_error(line, "expected a number, got '" + v + "'");
    }
}

long long to_int(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        long long n = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        config_error(line, "expected an integer, got '" + v + "'");
    }
}

std::size_t to_count(const std::string& v, std::size_t line) {
    long long n = to_int(v, line);
    if (n < 0) config_error(line, "expected a non-negative integer");
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& v, std::size_t line) {
    if (v == "true") return true;
    if (v == "false") return false;
    config_error(line, "expected true or false, got '" + v + "'");
}

using Setter = std::function<void(Config&, const std::string&, std::size_t)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"llm.endpoint", [](Config& c, const std::string& v, std::size_t) { c.llm_endpoint = v; }},
        {"llm.api_key_env", [](Config& c, const std::string& v, std::size_t) { c.llm_api_key_env = v; }},
        {"llm.model", [](Config& c, const std::string& v, std::size_t) { c.llm_model = v; }},
        {"llm.temperature",
         [](Config& c, const std::string& v, std::size_t l) {
             c.llm_temperature = to_double(v, l);
             if (c.llm_temperature < 0) config_error(l, "temperature must be >= 0");
         }},
        {"llm.max_tokens",
         [](Config& c, const std::string& v, std::size_t l) {
             c.llm_max_tokens = static_cast<int>(to_int(v, l));
             if (c.llm_max_tokens <= 0) config_error(l, "max_tokens must be positive");
         }},
        {"llm.response_pointer", [](Config& c, const std::string& v, std::size_t) { c.llm_response_pointer = v; }},
        {"llm.mock_script", [](Config& c, const std::string& v, std::size_t) { c.llm_mock_script = v; }},
        {"llm.preferred_language", [](Config& c, const std::string& v, std::size_t) { c.preferred_language = v; }},
        {"llm.retries",
         [](Config& c, const std::string& v, std::size_t l) { c.llm_retry.attempts = static_cast<int>(to_int(v, l)); }},
        {"llm.backoff_ms",
         [](Config& c, const std::string& v, std::size_t l) {
             c.llm_retry.initial_backoff = std::chrono::milliseconds(to_int(v, l));
         }},
        {"llm.timeout_ms",
         [](Config& c, const std::string& v, std::size_t l) { c.llm_retry.timeout = std::chrono::milliseconds(to_int(v, l)); }},
        {"umls.base_url", [](Config& c, const std::string& v, std::size_t) { c.umls_base_url = v; }},
        {"umls.api_key_env", [](Config& c, const std::string& v, std::size_t) { c.umls_api_key_env = v; }},
        {"umls.search_path", [](Config& c, const std::string& v, std::size_t) { c.umls_search_path = v; }},
        {"umls.relations_path", [](Config& c, const std::string& v, std::size_t) { c.umls_relations_path = v; }},
        {"umls.max_triples", [](Config& c, const std::string& v, std::size_t l) { c.umls_max_triples = to_count(v, l); }},
        {"umls.max_in_flight",
         [](Config& c, const std::string& v, std::size_t l) {
             c.umls_max_in_flight = static_cast<std::ptrdiff_t>(to_count(v, l));
             if (c.umls_max_in_flight == 0) config_error(l, "max_in_flight must be positive");
         }},
        {"umls.retries",
         [](Config& c, const std::string& v, std::size_t l) { c.umls_retry.attempts = static_cast<int>(to_int(v, l)); }},
        {"umls.backoff_ms",
         [](Config& c, const std::string& v, std::size_t l) {
             c.umls_retry.initial_backoff = std::chrono::milliseconds(to_int(v, l));
         }},
        {"umls.timeout_ms",
         [](Config& c, const std::string& v, std::size_t l) { c.umls_retry.timeout = std::chrono::milliseconds(to_int(v, l)); }},
        {"cache.path", [](Config& c, const std::string& v, std::size_t) { c.cache_path = v; }},
        {"cache.ttl_seconds",
         [](Config& c, const std::string& v, std::size_t l) {
             long long s = to_int(v, l);
             if (s > 0) {
                 c.cache_ttl = std::chrono::seconds(s);
             } else {
                 c.cache_ttl.reset();  // 0 or negative: never expire
             }
         }},
        {"ranking.k1", [](Config& c, const std::string& v, std::size_t l) { c.ranking.embed_top_k = to_count(v, l); }},
        {"ranking.k2", [](Config& c, const std::string& v, std::size_t l) { c.ranking.cross_top_k = to_count(v, l); }},
        {"ranking.tau",
         [](Config& c, const std::string& v, std::size_t l) { c.ranking.validity_threshold = to_double(v, l); }},
        {"ranking.embedder_url", [](Config& c, const std::string& v, std::size_t) { c.embedder_url = v; }},
        {"ranking.cross_scorer_url", [](Config& c, const std::string& v, std::size_t) { c.cross_scorer_url = v; }},
        {"bm25.k1",
         [](Config& c, const std::string& v, std::size_t l) {
             c.bm25.k1 = to_double(v, l);
             if (!(c.bm25.k1 > 0)) config_error(l, "bm25.k1 must be > 0");
         }},
        {"bm25.b",
         [](Config& c, const std::string& v, std::size_t l) {
             c.bm25.b = to_double(v, l);
             if (c.bm25.b < 0 || c.bm25.b > 1) config_error(l, "bm25.b must lie in [0, 1]");
         }},
        {"bm25.epsilon",
         [](Config& c, const std::string& v, std::size_t l) {
             c.bm25.idf_epsilon = to_double(v, l);
             if (c.bm25.idf_epsilon < 0) config_error(l, "bm25.epsilon must be >= 0");
         }},
        {"bm25.window",
         [](Config& c, const std::string& v, std::size_t l) {
             c.chunk_window = to_count(v, l);
             if (c.chunk_window == 0) config_error(l, "bm25.window must be positive");
         }},
        {"bm25.top_n", [](Config& c, const std::string& v, std::size_t l) { c.mining_top_n = to_count(v, l); }},
        {"pipeline.parallel",
         [](Config& c, const std::string& v, std::size_t l) {
             c.parallel = to_count(v, l);
             if (c.parallel == 0) config_error(l, "pipeline.parallel must be positive");
         }},
        {"pipeline.declarative", [](Config& c, const std::string& v, std::size_t l) { c.declarative = to_bool(v, l); }},
        {"templates.dir", [](Config& c, const std::string& v, std::size_t) { c.template_dir = v; }},
    };
    return table;
}

std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

class UnconfiguredConceptSource : public ConceptSource {
public:
    KnowledgeGraph fetch(const MedicalEntity& entity) override {
        throw Error(ErrorCode::RemoteUnavailable,
                    "'" + entity.english + "' is not cached and no umls.base_url is configured");
    }
};

} // namespace

Config parse_config(std::string_view content) {
    Config config;
    std::istringstream in{std::string(content)};
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') config_error(line_no, "malformed section header");
            section = text::trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) config_error(line_no, "expected key = value");
        std::string key = text::trim(std::string_view(t).substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        auto it = setters().find(key);
        if (it == setters().end()) config_error(line_no, "unknown key '" + key + "'");
        it->second(config, parse_value(t.substr(eq + 1), line_no), line_no);
    }
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string(), path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    Config config;
    try {
        config = parse_config(ss.str());
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what(), path.string());
    }
    // relative paths in the file are relative to the file
    const auto base = path.parent_path();
    auto anchor = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    anchor(config.cache_path);
    anchor(config.template_dir);
    if (!config.llm_mock_script.empty()) {
        std::filesystem::path script = config.llm_mock_script;
        anchor(script);
        config.llm_mock_script = script.string();
    }
    return config;
}

Engine build_engine(const Config& config) {
    Engine engine;
    auto templates = std::make_shared<TemplateLibrary>(
        config.template_dir.empty() ? TemplateLibrary() : TemplateLibrary::from_directory(config.template_dir));

    if (!config.llm_mock_script.empty()) {
        engine.backend = std::shared_ptr<LlmBackend>(ScriptedMockBackend::from_file(config.llm_mock_script));
    } else if (!config.llm_endpoint.empty()) {
        ChatEndpointConfig chat;
        chat.url = config.llm_endpoint;
        chat.api_key = env_or_empty(config.llm_api_key_env);
        chat.response_pointer = config.llm_response_pointer;
        chat.retry = config.llm_retry;
        engine.backend = std::make_shared<HttpChatBackend>(std::move(chat));
    } else {
        throw Error(ErrorCode::ConfigError, "set llm.endpoint or llm.mock_script");
    }
    GenerationSettings settings{config.llm_model, config.llm_temperature, config.llm_max_tokens};
    engine.llm = std::make_shared<LlmGateway>(engine.backend, templates, settings);

    engine.cache = std::make_shared<KnowledgeCache>(CacheOptions{config.cache_path, config.cache_ttl});
    std::shared_ptr<ConceptSource> source;
    if (config.umls_base_url.empty()) {
        source = std::make_shared<UnconfiguredConceptSource>();
    } else {
        ConceptApiConfig api;
        api.base_url = config.umls_base_url;
        api.api_key = env_or_empty(config.umls_api_key_env);
        api.search_path = config.umls_search_path;
        api.relations_path = config.umls_relations_path;
        api.max_triples = config.umls_max_triples;
        api.retry = config.umls_retry;
        source = std::make_shared<ConceptApiClient>(std::move(api));
    }
    engine.retriever =
        std::make_shared<KgRetriever>(engine.cache, source, RetrieverOptions{config.umls_max_in_flight});

    if (config.embedder_url.empty()) {
        engine.embedder = std::make_shared<HashingEmbedder>();
    } else {
        engine.embedder = std::make_shared<HttpEmbedder>(config.embedder_url, config.llm_retry);
    }
    if (config.cross_scorer_url.empty()) {
        engine.cross_scorer = std::make_shared<JaccardCrossScorer>();
    } else {
        engine.cross_scorer = std::make_shared<HttpCrossScorer>(config.cross_scorer_url, config.llm_retry);
    }

    PipelineOptions options;
    options.ranking = config.ranking;
    options.bm25 = config.bm25;
    options.chunk_window = config.chunk_window;
    options.mining_top_n = config.mining_top_n;
    options.declarative = config.declarative;
    options.preferred_language = config.preferred_language;
    engine.pipeline =
        std::make_unique<Pipeline>(engine.llm, engine.retriever, engine.embedder, engine.cross_scorer, options);
    return engine;
}

} // namespace mkg

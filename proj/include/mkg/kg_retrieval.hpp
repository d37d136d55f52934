#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mkg/core.hpp"
#include "mkg/http.hpp"

namespace mkg {

using Clock = std::chrono::system_clock;

/// "2026-10-15T06:44:00Z"
std::string format_utc(Clock::time_point t);
/// Inverse of format_utc; throws std::invalid_argument.
Clock::time_point parse_utc(const std::string& s);

struct RetrievalStats {
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::vector<double> remote_latency_ms;
    std::vector<double> local_latency_ms;

    std::uint64_t lookups() const { return cache_hits + cache_misses; }
};

double median(std::vector<double> samples);

class StatsRecorder {
public:
    void record_lookup(bool hit, std::chrono::nanoseconds elapsed);
    void record_remote(std::chrono::nanoseconds elapsed);
    RetrievalStats snapshot() const;
    void reset();

private:
    mutable std::mutex mu_;
    RetrievalStats stats_;
};

struct CacheRecord {
    std::string key;
    std::vector<Triple> triples;
    Clock::time_point fetched_at;
};

struct CacheOptions {
    std::filesystem::path path = "mkg_cache.jsonl";
    std::optional<std::chrono::seconds> ttl;  // empty: records never expire
    std::function<Clock::time_point()> clock = [] { return Clock::now(); };
};

/// The local knowledge base: an append-only log of JSON lines
/// {"key", "triples", "fetched_at"} replayed into memory on open, last record
/// per key winning. Readers share a lock; appends are serialized in-process and
/// guarded by flock(2) across processes.
class KnowledgeCache {
public:
    /// Throws CacheCorrupt (detail = line number) on an unreadable record.
    /// A torn final line without a newline is skipped.
    explicit KnowledgeCache(CacheOptions options);
    ~KnowledgeCache();

    KnowledgeCache(const KnowledgeCache&) = delete;
    KnowledgeCache& operator=(const KnowledgeCache&) = delete;

    /// Stored triples when a live record exists. Counts one hit or miss.
    std::optional<std::vector<Triple>> lookup(const std::string& key);
    /// Same as lookup but leaves the statistics untouched.
    std::optional<CacheRecord> peek(const std::string& key) const;

    void store(const std::string& key, std::vector<Triple> triples);

    /// Rewrites the log with one record per key, sorted by key.
    void compact();

    std::size_t size() const;
    std::vector<CacheRecord> records() const;
    const std::filesystem::path& path() const { return options_.path; }

    StatsRecorder& stats() { return stats_; }
    const StatsRecorder& stats() const { return stats_; }

private:
    bool expired(const CacheRecord& r) const;
    void load();
    void open_for_append();
    void drop_torn_tail();
    void append_line(const std::string& line);

    CacheOptions options_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, CacheRecord> records_;
    std::mutex write_mu_;
    int fd_ = -1;
    std::optional<std::size_t> torn_offset_;
    std::size_t loaded_size_ = 0;
    StatsRecorder stats_;
};

/// Where cache misses go.
class ConceptSource {
public:
    virtual ~ConceptSource() = default;
    /// Best-matching concept's relations as a graph keyed by the normalized
    /// English term. Unknown terms give an empty graph.
    virtual KnowledgeGraph fetch(const MedicalEntity& entity) = 0;
};

struct ConceptApiConfig {
    std::string base_url;
    std::string api_key;
    std::string search_path = "/search";                     // ?string=<term>
    std::string relations_path = "/concepts/{id}/relations";
    std::size_t max_triples = 50;
    RetryPolicy retry;
};

/// Two-call client: term search -> [{concept_id, name, score}], then relation
/// fetch -> [{subject_name, relation_label, object_name, language}].
class ConceptApiClient : public ConceptSource {
public:
    explicit ConceptApiClient(ConceptApiConfig config);
    KnowledgeGraph fetch(const MedicalEntity& entity) override;

private:
    ConceptApiConfig config_;
    Endpoint endpoint_;
};

struct EntityRetrieval {
    std::string key;
    KnowledgeGraph graph;
    bool from_cache = false;
    std::optional<Error> error;  // set when the remote fetch failed
};

struct RetrieverOptions {
    std::ptrdiff_t max_remote_in_flight = 4;
};

/// Lookup-then-fetch-then-store over a KnowledgeCache.
class KgRetriever {
public:
    KgRetriever(std::shared_ptr<KnowledgeCache> cache, std::shared_ptr<ConceptSource> source,
                RetrieverOptions options = {});

    /// One result per entity, in input order. Remote failures are reported per
    /// entity, never thrown.
    std::vector<EntityRetrieval> retrieve(const std::vector<MedicalEntity>& entities);

    /// Fetches `english` remotely regardless of cache state and stores it.
    KnowledgeGraph refresh(const std::string& english);

    KnowledgeCache& cache() { return *cache_; }
    RetrievalStats stats() const { return cache_->stats().snapshot(); }

private:
    KnowledgeGraph fetch_and_store(const MedicalEntity& entity, const std::string& key);

    std::shared_ptr<KnowledgeCache> cache_;
    std::shared_ptr<ConceptSource> source_;
    std::counting_semaphore<1024> remote_slots_;
};

/// The graphs of a retrieval, in order.
std::vector<KnowledgeGraph> graphs_of(const std::vector<EntityRetrieval>& results);

} // namespace mkg

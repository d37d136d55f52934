#include "mkg/kg_retrieval.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "http_internal.hpp"

namespace mkg {

using nlohmann::json;

std::string format_utc(Clock::time_point t) {
    std::time_t tt = Clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Clock::time_point parse_utc(const std::string& s) {
    std::tm tm{};
    std::istringstream in(s);
    in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    if (in.fail()) {
        throw std::invalid_argument("not a UTC timestamp: " + s);
    }
    return Clock::from_time_t(timegm(&tm));
}

double median(std::vector<double> samples) {
    if (samples.empty()) return 0.0;
    auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    if (samples.size() % 2 == 1) return *mid;
    double upper = *mid;
    double lower = *std::max_element(samples.begin(), mid);
    return (lower + upper) / 2.0;
}

// --- stats ----------------------------------------------------------------

namespace {
double to_ms(std::chrono::nanoseconds d) { return std::chrono::duration<double, std::milli>(d).count(); }
} // namespace

void StatsRecorder::record_lookup(bool hit, std::chrono::nanoseconds elapsed) {
    std::lock_guard lock(mu_);
    ++(hit ? stats_.cache_hits : stats_.cache_misses);
    stats_.local_latency_ms.push_back(to_ms(elapsed));
}

void StatsRecorder::record_remote(std::chrono::nanoseconds elapsed) {
    std::lock_guard lock(mu_);
    stats_.remote_latency_ms.push_back(to_ms(elapsed));
}

RetrievalStats StatsRecorder::snapshot() const {
    std::lock_guard lock(mu_);
    return stats_;
}

void StatsRecorder::reset() {
    std::lock_guard lock(mu_);
    stats_ = {};
}

// --- cache ----------------------------------------------------------------

namespace {

json triple_to_json(const Triple& t) {
    return {{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}, {"language", t.language}};
}

std::string record_line(const CacheRecord& r) {
    json triples = json::array();
    for (const auto& t : r.triples) triples.push_back(triple_to_json(t));
    json j = {{"key", r.key}, {"triples", std::move(triples)}, {"fetched_at", format_utc(r.fetched_at)}};
    return j.dump() + "\n";
}

CacheRecord record_from_json(const json& j) {
    CacheRecord r;
    r.key = j.at("key").get<std::string>();
    if (r.key.empty() || normalize_entity_key(r.key) != r.key) {
        throw std::invalid_argument("key is not normalized");
    }
    for (const auto& t : j.at("triples")) {
        r.triples.push_back({t.at("subject").get<std::string>(), t.at("relation").get<std::string>(),
                             t.at("object").get<std::string>(), r.key, t.value("language", "")});
    }
    r.fetched_at = parse_utc(j.at("fetched_at").get<std::string>());
    return r;
}

} // namespace

KnowledgeCache::KnowledgeCache(CacheOptions options) : options_(std::move(options)) {
    load();
    open_for_append();
    if (torn_offset_) drop_torn_tail();
}

KnowledgeCache::~KnowledgeCache() {
    if (fd_ >= 0) ::close(fd_);
}

void KnowledgeCache::load() {
    std::ifstream in(options_.path, std::ios::binary);
    if (!in) return;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        ++line_no;
        auto nl = content.find('\n', pos);
        bool terminated = nl != std::string::npos;
        std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
        pos = terminated ? nl + 1 : content.size();
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            CacheRecord r = record_from_json(json::parse(line));
            std::string key = r.key;
            records_.insert_or_assign(std::move(key), std::move(r));
        } catch (const std::exception& e) {
            if (!terminated) {
                spdlog::warn("{}: ignoring torn final record at line {}", options_.path.string(), line_no);
                torn_offset_ = content.size() - line.size();
                loaded_size_ = content.size();
                continue;
            }
            throw Error(ErrorCode::CacheCorrupt,
                        options_.path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                        std::to_string(line_no));
        }
    }
}

void KnowledgeCache::open_for_append() {
    if (options_.path.has_parent_path()) {
        std::filesystem::create_directories(options_.path.parent_path());
    }
    fd_ = ::open(options_.path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(ErrorCode::CacheCorrupt,
                    "cannot open " + options_.path.string() + ": " + std::strerror(errno), "0");
    }
}

void KnowledgeCache::drop_torn_tail() {
    ::flock(fd_, LOCK_EX);
    // Only truncate if nobody appended since we read the file.
    struct stat st {};
    if (::fstat(fd_, &st) == 0 && static_cast<std::size_t>(st.st_size) == loaded_size_) {
        if (::ftruncate(fd_, static_cast<off_t>(*torn_offset_)) != 0) {
            spdlog::warn("{}: could not drop torn tail: {}", options_.path.string(), std::strerror(errno));
        }
    }
    ::flock(fd_, LOCK_UN);
    torn_offset_.reset();
}

void KnowledgeCache::append_line(const std::string& line) {
    std::lock_guard lock(write_mu_);
    ::flock(fd_, LOCK_EX);
    // A torn tail from an earlier crash would glue onto this record.
    off_t end = ::lseek(fd_, 0, SEEK_END);
    if (end > 0) {
        char last = 0;
        int rfd = ::open(options_.path.c_str(), O_RDONLY | O_CLOEXEC);
        if (rfd >= 0) {
            if (::pread(rfd, &last, 1, end - 1) == 1 && last != '\n') {
                [[maybe_unused]] auto n = ::write(fd_, "\n", 1);
            }
            ::close(rfd);
        }
    }
    const char* data = line.data();
    std::size_t left = line.size();
    while (left > 0) {
        ssize_t n = ::write(fd_, data, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::flock(fd_, LOCK_UN);
            throw Error(ErrorCode::CacheCorrupt, "write to " + options_.path.string() + " failed", "0");
        }
        data += n;
        left -= static_cast<std::size_t>(n);
    }
    ::flock(fd_, LOCK_UN);
}

bool KnowledgeCache::expired(const CacheRecord& r) const {
    if (!options_.ttl) return false;
    return options_.clock() - r.fetched_at > *options_.ttl;
}

std::optional<std::vector<Triple>> KnowledgeCache::lookup(const std::string& key) {
    auto start = std::chrono::steady_clock::now();
    std::optional<std::vector<Triple>> found;
    {
        std::shared_lock lock(mu_);
        auto it = records_.find(key);
        if (it != records_.end() && !expired(it->second)) found = it->second.triples;
    }
    stats_.record_lookup(found.has_value(), std::chrono::steady_clock::now() - start);
    return found;
}

std::optional<CacheRecord> KnowledgeCache::peek(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void KnowledgeCache::store(const std::string& key, std::vector<Triple> triples) {
    CacheRecord r{key, std::move(triples), options_.clock()};
    for (auto& t : r.triples) t.entity_key = key;
    append_line(record_line(r));
    std::unique_lock lock(mu_);
    records_.insert_or_assign(key, std::move(r));
}

void KnowledgeCache::compact() {
    std::unique_lock lock(mu_);
    std::lock_guard write_lock(write_mu_);
    std::vector<const CacheRecord*> ordered;
    for (const auto& [_, r] : records_) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->key < b->key; });

    auto tmp = options_.path;
    tmp += ".compact.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto* r : ordered) out << record_line(*r);
        out.flush();
        if (!out) throw Error(ErrorCode::CacheCorrupt, "cannot write " + tmp.string(), "0");
    }
    ::flock(fd_, LOCK_EX);
    std::filesystem::rename(tmp, options_.path);
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
    fd_ = -1;
    open_for_append();
}

std::size_t KnowledgeCache::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

std::vector<CacheRecord> KnowledgeCache::records() const {
    std::shared_lock lock(mu_);
    std::vector<CacheRecord> out;
    for (const auto& [_, r] : records_) out.push_back(r);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
}

// --- remote concept API ---------------------------------------------------

ConceptApiClient::ConceptApiClient(ConceptApiConfig config)
    : config_(std::move(config)), endpoint_(Endpoint::parse(config_.base_url)) {}

KnowledgeGraph ConceptApiClient::fetch(const MedicalEntity& entity) {
    if (entity.english.empty()) {
        throw Error(ErrorCode::ContractViolation, "fetch needs a translated entity");
    }
    KnowledgeGraph graph;
    graph.entity_key = normalize_entity_key(entity.english);

    auto client = detail::make_client(endpoint_, config_.retry);
    httplib::Params params{{"string", entity.english}};
    if (!config_.api_key.empty()) params.emplace("apiKey", config_.api_key);

    const std::string search_path = endpoint_.path_prefix + config_.search_path;
    std::string body = detail::send_with_retries(
        config_.retry, [&] { return client.Get(search_path, params, httplib::Headers{}); },
        ErrorCode::RemoteUnavailable, "concept search for '" + entity.english + "'");

    std::string concept_id;
    try {
        json hits = json::parse(body);
        if (!hits.is_array()) throw std::invalid_argument("search response is not a list");
        double best = 0.0;
        for (const auto& h : hits) {
            double score = h.at("score").get<double>();
            if (concept_id.empty() || score > best) {
                concept_id = h.at("concept_id").get<std::string>();
                best = score;
            }
        }
    } catch (const std::exception& e) {
        throw Error(ErrorCode::RemoteProtocolError, std::string("concept search payload: ") + e.what(), body);
    }
    if (concept_id.empty()) return graph;

    std::string relations_path = config_.relations_path;
    if (auto at = relations_path.find("{id}"); at != std::string::npos) {
        relations_path.replace(at, 4, detail::url_encode(concept_id));
    }
    relations_path = endpoint_.path_prefix + relations_path;
    httplib::Params key_params;
    if (!config_.api_key.empty()) key_params.emplace("apiKey", config_.api_key);
    body = detail::send_with_retries(
        config_.retry, [&] { return client.Get(relations_path, key_params, httplib::Headers{}); },
        ErrorCode::RemoteUnavailable, "relation fetch for " + concept_id);

    try {
        json relations = json::parse(body);
        if (!relations.is_array()) throw std::invalid_argument("relation response is not a list");
        for (const auto& rel : relations) {
            if (graph.triples.size() >= config_.max_triples) break;
            Triple t{rel.at("subject_name").get<std::string>(), rel.at("relation_label").get<std::string>(),
                     rel.at("object_name").get<std::string>(), graph.entity_key, rel.value("language", "")};
            if (t.subject.empty() || t.relation.empty() || t.object.empty()) continue;
            graph.triples.push_back(std::move(t));
        }
    } catch (const std::exception& e) {
        throw Error(ErrorCode::RemoteProtocolError, std::string("relation payload: ") + e.what(), body);
    }
    return graph;
}

// --- retriever ------------------------------------------------------------

KgRetriever::KgRetriever(std::shared_ptr<KnowledgeCache> cache, std::shared_ptr<ConceptSource> source,
                         RetrieverOptions options)
    : cache_(std::move(cache)),
      source_(std::move(source)),
      remote_slots_(std::clamp<std::ptrdiff_t>(options.max_remote_in_flight, 1, 1024)) {}

KnowledgeGraph KgRetriever::fetch_and_store(const MedicalEntity& entity, const std::string& key) {
    remote_slots_.acquire();
    auto start = std::chrono::steady_clock::now();
    KnowledgeGraph graph;
    try {
        graph = source_->fetch(entity);
    } catch (...) {
        remote_slots_.release();
        throw;
    }
    remote_slots_.release();
    cache_->stats().record_remote(std::chrono::steady_clock::now() - start);
    graph.entity_key = key;
    for (auto& t : graph.triples) t.entity_key = key;
    cache_->store(key, graph.triples);
    return graph;
}

std::vector<EntityRetrieval> KgRetriever::retrieve(const std::vector<MedicalEntity>& entities) {
    std::vector<EntityRetrieval> out(entities.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        out[i].key = normalize_entity_key(entities[i].english);
        out[i].graph.entity_key = out[i].key;
        if (auto hit = cache_->lookup(out[i].key)) {
            out[i].graph.triples = std::move(*hit);
            out[i].from_cache = true;
        } else {
            misses.push_back(i);
        }
    }

    auto fetch_one = [&](std::size_t i) {
        try {
            out[i].graph = fetch_and_store(entities[i], out[i].key);
        } catch (const Error& e) {
            spdlog::warn("retrieval for '{}' failed: {}", entities[i].english, e.what());
            out[i].error = e;
        }
    };
    if (misses.size() == 1) {
        fetch_one(misses.front());
    } else if (!misses.empty()) {
        std::vector<std::future<void>> pending;
        for (std::size_t i : misses) pending.push_back(std::async(std::launch::async, fetch_one, i));
        for (auto& f : pending) f.get();
    }
    return out;
}

KnowledgeGraph KgRetriever::refresh(const std::string& english) {
    MedicalEntity e{english, english, EntityOrigin::stem()};
    return fetch_and_store(e, normalize_entity_key(english));
}

std::vector<KnowledgeGraph> graphs_of(const std::vector<EntityRetrieval>& results) {
    std::vector<KnowledgeGraph> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.graph);
    return out;
}

} // namespace mkg

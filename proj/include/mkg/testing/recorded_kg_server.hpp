#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

namespace mkg::testing {

/// Local stand-in for the remote concept API, replaying a recorded fixture:
///
///   {"search":    {"<normalized term>": [{"concept_id", "name", "score"}, ...]},
///    "relations": {"<concept_id>": [{"subject_name", "relation_label",
///                                    "object_name", "language"}, ...]}}
///
/// Unknown terms search to []; unknown concepts return 404. Latency and
/// transient failures can be injected.
class RecordedKgServer {
public:
    explicit RecordedKgServer(const std::string& fixture_json);
    static std::unique_ptr<RecordedKgServer> from_file(const std::filesystem::path& path);
    ~RecordedKgServer();

    RecordedKgServer(const RecordedKgServer&) = delete;
    RecordedKgServer& operator=(const RecordedKgServer&) = delete;

    /// Binds 127.0.0.1 (port 0 picks a free one) and serves on a background thread.
    void start(int port = 0);
    void stop();

    int port() const;
    std::string base_url() const;

    void set_latency(std::chrono::milliseconds latency);
    /// The next `count` requests answer with `status` instead of the fixture.
    void fail_next(int count, int status = 429);

    int search_calls() const;
    int relation_calls() const;
    int total_calls() const { return search_calls() + relation_calls(); }
    void reset_counters();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace mkg::testing

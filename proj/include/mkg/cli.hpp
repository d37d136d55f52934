#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "mkg/error.hpp"
#include "mkg/kg_retrieval.hpp"

namespace mkg::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kConfigError = 2,
    kBackendUnavailable = 3,
    kDatasetError = 4,
};

ExitCode exit_code_for(ErrorCode code);

/// Entry point behind the `mkg` binary. `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lifetime cache counters kept beside the cache log as `<cache>.stats.json`,
/// so `mkg cache stats` can report across processes.
struct PersistedStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t local_samples = 0;
    double local_total_ms = 0.0;
    std::uint64_t remote_samples = 0;
    double remote_total_ms = 0.0;
};

std::filesystem::path stats_path_for(const std::filesystem::path& cache_path);
PersistedStats read_persisted_stats(const std::filesystem::path& cache_path);
/// Adds a session's statistics to the sidecar under an exclusive file lock.
void merge_persisted_stats(const std::filesystem::path& cache_path, const RetrievalStats& session);

} // namespace mkg::cli

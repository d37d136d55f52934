#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace mkg {

/// Attempts and exponential backoff shared by every remote client.
struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::milliseconds timeout{30000};
    // Tests swap this out to observe backoff without sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// "https://host:port/some/prefix" split into the origin httplib wants and the
/// path prefix prepended to every request path.
struct Endpoint {
    std::string origin;
    std::string path_prefix;

    static Endpoint parse(const std::string& url);
};

} // namespace mkg

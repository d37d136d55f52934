#include "http_internal.hpp"

#include <thread>

namespace mkg {

Endpoint Endpoint::parse(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "URL lacks a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    if (path_start == std::string::npos) {
        e.origin = url;
    } else {
        e.origin = url.substr(0, path_start);
        e.path_prefix = url.substr(path_start);
        while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
    }
    return e;
}

namespace detail {

httplib::Client make_client(const Endpoint& endpoint, const RetryPolicy& policy) {
    httplib::Client client(endpoint.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    return client;
}

std::string send_with_retries(const RetryPolicy& policy, const std::function<httplib::Result()>& send,
                              ErrorCode failure, const std::string& what) {
    auto backoff = policy.initial_backoff;
    std::string last_error;
    int attempts = std::max(policy.attempts, 1);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Result res = send();
        if (res && res->status == 200) {
            return res->body;
        }
        bool retriable = true;
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else {
            last_error = "HTTP " + std::to_string(res->status);
            retriable = res->status == 429 || res->status >= 500;
        }
        if (!retriable || attempt == attempts) break;
        if (policy.sleep) {
            policy.sleep(backoff);
        } else {
            std::this_thread::sleep_for(backoff);
        }
        backoff *= 2;
    }
    throw Error(failure, what + " failed: " + last_error);
}

std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

} // namespace detail
} // namespace mkg

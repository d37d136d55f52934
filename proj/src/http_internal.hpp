#pragma once

#include <functional>
#include <string>

#include <httplib.h>

#include "mkg/error.hpp"
#include "mkg/http.hpp"

namespace mkg::detail {

httplib::Client make_client(const Endpoint& endpoint, const RetryPolicy& policy);

/// Sends until a 200 arrives or attempts run out. Connection failures, 429 and
/// 5xx are retried with doubling backoff; any other status fails at once.
/// Returns the 200 body; throws `Error(failure, ...)` otherwise.
std::string send_with_retries(const RetryPolicy& policy, const std::function<httplib::Result()>& send,
                              ErrorCode failure, const std::string& what);

std::string url_encode(const std::string& s);

} // namespace mkg::detail

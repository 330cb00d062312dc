#pragma once

#include "litctl/error.hpp"

#include "json.hpp"

#include <chrono>
#include <string>
#include <string_view>
#include <thread>

namespace litctl {

/// An OpenAI-style HTTP service: base URL such as "https://host/v1" and an
/// optional bearer key.
struct Endpoint {
    std::string base_url;
    std::string api_key;
    std::chrono::milliseconds timeout{60000};
};

/// Reads LF_API_BASE and LF_API_KEY. Throws InvalidArgument if LF_API_BASE is unset.
Endpoint endpoint_from_env();

/// POSTs `body` to base_url + path. Connection failures, 429 and 5xx raise
/// TransportError; other non-2xx statuses raise ApiError.
nlohmann::json post_json(const Endpoint& ep, std::string_view path, const nlohmann::json& body);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{500};
    double backoff = 2.0;
};

/// Calls fn() until it succeeds or `attempts` TransportErrors have been
/// raised, sleeping base_delay * backoff^k between tries. Other exceptions
/// propagate immediately.
template <typename F>
auto with_retries(const RetryPolicy& policy, F&& fn) -> decltype(fn())
{
    auto delay = policy.base_delay;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            if (attempt >= policy.attempts)
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
        }
        if (delay.count() > 0)
            std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.backoff));
    }
}

} // namespace litctl

#include "httplib.h"

#include "litctl/http.hpp"

#include <cstdlib>

namespace litctl {

namespace {

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path without trailing '/'
};

ParsedUrl parse_url(const std::string& url)
{
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw InvalidArgument("endpoint URL needs a scheme: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.origin = url.substr(0, path_start);
    out.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/')
        out.prefix.pop_back();
    return out;
}

} // namespace

Endpoint endpoint_from_env()
{
    const char* base = std::getenv("LF_API_BASE");
    if (!base || !*base)
        throw InvalidArgument("LF_API_BASE is not set");
    const char* key = std::getenv("LF_API_KEY");
    return Endpoint{base, key ? key : ""};
}

nlohmann::json post_json(const Endpoint& ep, std::string_view path, const nlohmann::json& body)
{
    const auto url = parse_url(ep.base_url);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout).count();
    client.set_connection_timeout(std::max<long long>(1, secs), 0);
    client.set_read_timeout(std::max<long long>(1, secs), 0);
    httplib::Headers headers;
    if (!ep.api_key.empty())
        headers.emplace("Authorization", "Bearer " + ep.api_key);

    std::string full_path = url.prefix;
    if (!path.empty() && path.front() != '/')
        full_path.push_back('/');
    full_path.append(path);

    auto res = client.Post(full_path, headers, body.dump(), "application/json");
    if (!res)
        throw TransportError("POST " + ep.base_url + std::string(path) + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("POST " + full_path + " returned HTTP " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
        throw ApiError("POST " + full_path + " returned HTTP " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ApiError("POST " + full_path + " returned invalid JSON: " + e.what());
    }
}

} // namespace litctl

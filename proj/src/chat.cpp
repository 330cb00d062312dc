#include "litctl/chat.hpp"

#include "litctl/util.hpp"

#include <sstream>

namespace litctl {

ChatRequest user_request(std::string prompt)
{
    ChatRequest req;
    req.messages.push_back({"user", std::move(prompt)});
    return req;
}

std::string prompt_hash(const ChatRequest& req)
{
    std::string joined;
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        if (i)
            joined.push_back('\n');
        joined += req.messages[i].content;
    }
    return sha256_hex(joined);
}

HttpChatClient::HttpChatClient(Endpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model))
{
}

std::string HttpChatClient::complete(const ChatRequest& req) const
{
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json body{{"model", model_},
                        {"messages", messages},
                        {"temperature", req.temperature},
                        {"top_p", req.top_p},
                        {"max_tokens", req.max_tokens}};
    if (req.seed)
        body["seed"] = *req.seed;
    const auto res = post_json(endpoint_, "/chat/completions", body);
    try {
        const auto& content = res.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ApiError(std::string("malformed chat completion: ") + e.what());
    }
}

MockChatClient::MockChatClient(std::string model_id) : model_id_(std::move(model_id)) {}

MockChatClient MockChatClient::from_file(const std::string& path, std::string model_id)
{
    MockChatClient client(std::move(model_id));
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty())
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            std::optional<std::uint64_t> seed;
            if (j.contains("seed") && !j["seed"].is_null())
                seed = j["seed"].get<std::uint64_t>();
            client.add(j.at("prompt_sha256").get<std::string>(), j.at("response").get<std::string>(), seed);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        }
    }
    return client;
}

void MockChatClient::add(std::string prompt_sha256, std::string response, std::optional<std::uint64_t> seed)
{
    replies_[{std::move(prompt_sha256), seed}] = std::move(response);
}

std::string MockChatClient::complete(const ChatRequest& req) const
{
    const auto hash = prompt_hash(req);
    if (req.seed) {
        auto it = replies_.find({hash, req.seed});
        if (it != replies_.end())
            return it->second;
    }
    auto it = replies_.find({hash, std::nullopt});
    if (it != replies_.end())
        return it->second;
    throw ApiError("no mock response for prompt " + hash);
}

} // namespace litctl

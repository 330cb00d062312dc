#pragma once

#include "litctl/http.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace litctl {

struct ChatMessage {
    std::string role; // "system", "user" or "assistant"
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0; // 0 requests greedy decoding
    double top_p = 1.0;
    int max_tokens = 200;
    std::optional<std::uint64_t> seed;
};

ChatRequest user_request(std::string prompt);

/// Key for mock fixtures: SHA-256 of the message contents joined with '\n'.
std::string prompt_hash(const ChatRequest& req);

/// A chat-completions backend. Implementations must be safe to call concurrently.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant text. Throws TransportError for retryable failures.
    virtual std::string complete(const ChatRequest& req) const = 0;
    virtual std::string model_id() const = 0;
};

/// POST {base}/chat/completions; reads choices[0].message.content.
class HttpChatClient final : public ChatClient {
public:
    HttpChatClient(Endpoint endpoint, std::string model);
    std::string complete(const ChatRequest& req) const override;
    std::string model_id() const override { return model_; }

private:
    Endpoint endpoint_;
    std::string model_;
};

/// Replays canned replies from mock_responses.jsonl lines
/// {"prompt_sha256": ..., "seed": optional, "response": ...}.
/// Lookup tries (hash, seed) first, then the hash alone.
class MockChatClient final : public ChatClient {
public:
    explicit MockChatClient(std::string model_id = "mock");
    static MockChatClient from_file(const std::string& path, std::string model_id = "mock");

    void add(std::string prompt_sha256, std::string response, std::optional<std::uint64_t> seed = std::nullopt);

    /// Throws ApiError when no reply is registered for the prompt.
    std::string complete(const ChatRequest& req) const override;
    std::string model_id() const override { return model_id_; }

private:
    std::string model_id_;
    std::map<std::pair<std::string, std::optional<std::uint64_t>>, std::string> replies_;
};

/// Rule-based stand-in for generator and judge models, used for hermetic runs.
///
/// Generation prompts get text assembled from sentence banks for the
/// requested FKRE range; sampled requests sometimes drift to a neighbouring
/// range, greedy ones only when the prompt carries no evidence. Preference
/// prompts are scored 5, 2 or 1 by how far the counterspeech's band is from
/// the persona's. Factual prompts get "Label: 1" unless the text is empty.
/// Politeness prompts are answered from a small lexicon. Replies are a pure
/// function of (prompt hash, seed).
class SimulatedChatClient final : public ChatClient {
public:
    explicit SimulatedChatClient(std::string model_id = "simulated-v1") : model_id_(std::move(model_id)) {}
    std::string complete(const ChatRequest& req) const override;
    std::string model_id() const override { return model_id_; }

private:
    std::string model_id_;
};

} // namespace litctl

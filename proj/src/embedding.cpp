#include "litctl/embedding.hpp"

#include "litctl/retrieval.hpp"
#include "litctl/util.hpp"

#include <cmath>

namespace litctl {

namespace {

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Vector normalized(Vector v)
{
    double norm = 0.0;
    for (double x : v)
        norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v)
            x /= norm;
    return v;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed)
{
    if (dimension_ == 0)
        throw InvalidArgument("embedding dimension must be positive");
}

std::vector<Vector> HashingEmbedder::embed(std::span<const std::string> texts) const
{
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Vector v(dimension_, 0.0);
        for (const auto& term : bm25_terms(text)) {
            const std::uint64_t h = splitmix64(fnv1a(term) ^ seed_);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            v[h % dimension_] += sign;
        }
        out.push_back(normalized(std::move(v)));
    }
    return out;
}

std::string HashingEmbedder::version() const
{
    return "hashing-v1:dim=" + std::to_string(dimension_) + ":seed=" + std::to_string(seed_);
}

HttpEmbedder::HttpEmbedder(Endpoint endpoint, std::string model, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), retry_(retry)
{
}

std::vector<Vector> HttpEmbedder::embed(std::span<const std::string> texts) const
{
    if (texts.empty())
        return {};
    nlohmann::json body{{"model", model_}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto res = with_retries(retry_, [&] { return post_json(endpoint_, "/embeddings", body); });
    if (!res.contains("data") || !res["data"].is_array() || res["data"].size() != texts.size())
        throw ApiError("embeddings response does not hold " + std::to_string(texts.size()) + " vectors");
    std::vector<Vector> out(texts.size());
    for (const auto& item : res["data"]) {
        const std::size_t idx = item.value("index", std::size_t{0});
        if (idx >= out.size() || !item.contains("embedding"))
            throw ApiError("malformed embeddings item");
        out[idx] = item["embedding"].get<Vector>();
    }
    for (auto& v : out) {
        if (v.empty())
            throw ApiError("embeddings response is missing an index");
        v = normalized(std::move(v));
    }
    return out;
}

} // namespace litctl

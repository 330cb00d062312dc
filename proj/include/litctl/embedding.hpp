#pragma once

#include "litctl/http.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace litctl {

using Vector = std::vector<double>;

/// Text to dense vectors. Implementations must be safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<Vector> embed(std::span<const std::string> texts) const = 0;
    /// Identifies the model; vectors from different versions are not comparable.
    virtual std::string version() const = 0;
};

/// Signed feature hashing of lowercase terms. Deterministic and offline.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0x5eed);
    std::vector<Vector> embed(std::span<const std::string> texts) const override;
    std::string version() const override;
    std::size_t dimension() const { return dimension_; }

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// POST {base}/embeddings with {"model", "input": [...]}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(Endpoint endpoint, std::string model, RetryPolicy retry = {});
    std::vector<Vector> embed(std::span<const std::string> texts) const override;
    std::string version() const override { return "http:" + model_; }

private:
    Endpoint endpoint_;
    std::string model_;
    RetryPolicy retry_;
};

/// Scales to unit L2 norm; the zero vector is returned unchanged.
Vector normalized(Vector v);
double dot(std::span<const double> a, std::span<const double> b);

} // namespace litctl

#pragma once

#include "litctl/embedding.hpp"
#include "litctl/knowledge_base.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace litctl {

enum class MergeMode { union_, intersection };

std::string to_string(MergeMode m);
MergeMode parse_merge_mode(std::string_view s);

/// A chunk and its retriever score.
struct Hit {
    std::string chunk_id;
    double score = 0.0;
    bool operator==(const Hit&) const = default;
};

/// Lowercased alphanumeric runs; everything else separates terms.
std::vector<std::string> bm25_terms(std::string_view text);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over the chunk texts of a knowledge base.
///   idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
///   score(d) = sum over distinct query terms t of
///              idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))
class KeywordIndex {
public:
    explicit KeywordIndex(const KnowledgeBase& kb, Bm25Params params = {});

    /// At most k hits with score > 0, by descending score then ascending chunk_id.
    /// Throws InvalidArgument on an empty index or a query without terms.
    std::vector<Hit> search(std::string_view query, std::size_t k) const;

private:
    const KnowledgeBase* kb_;
    Bm25Params params_;
    std::vector<std::map<std::string, std::size_t, std::less<>>> tf_;
    std::vector<std::size_t> length_;
    std::map<std::string, std::size_t, std::less<>> df_;
    double avgdl_ = 0.0;
};

/// Unit-normalized chunk embeddings searched exhaustively by cosine.
class SemanticIndex {
public:
    static SemanticIndex build(const KnowledgeBase& kb, const Embedder& embedder);
    SemanticIndex(const KnowledgeBase& kb, std::vector<Vector> embeddings, std::string embedder_version);

    /// Top k by descending cosine then ascending chunk_id. Throws
    /// InvalidArgument on embedder version or dimension mismatch; embedder
    /// transport failures propagate as TransportError.
    std::vector<Hit> search(std::string_view query, std::size_t k, const Embedder& embedder) const;

    const std::string& embedder_version() const { return version_; }

private:
    const KnowledgeBase* kb_;
    std::vector<Vector> vectors_;
    std::string version_;
};

std::vector<Hit> keyword_search(const KeywordIndex& index, std::string_view query, std::size_t k);
std::vector<Hit> semantic_search(const SemanticIndex& index, std::string_view query, std::size_t k,
                                 const Embedder& embedder);

inline constexpr double kRrfConstant = 60.0;

/// A merged candidate. Ranks are 1-based; 0 means absent from that list.
struct Candidate {
    std::string chunk_id;
    double fused = 0.0;
    std::size_t keyword_rank = 0;
    std::size_t semantic_rank = 0;
    bool operator==(const Candidate&) const = default;
};

/// Reciprocal-rank fusion: fused = sum over lists of 1 / (60 + rank).
/// union keeps every chunk, intersection only chunks in both lists.
/// Ordered by descending fused score then ascending chunk_id.
std::vector<Candidate> hybrid_merge(const std::vector<Hit>& keyword, const std::vector<Hit>& semantic,
                                    MergeMode mode);

/// First k candidates by fused score (ties by chunk_id). Throws on k == 0.
std::vector<Candidate> select_top_k(std::vector<Candidate> candidates, std::size_t k);

/// Top-k defaults per level: low 10, medium 3, high 10.
std::size_t default_top_k(Level level);

/// Rates how acceptable a piece of evidence is to a reader at `level`, 1..5.
/// Must be safe to call concurrently.
class EvidenceRater {
public:
    virtual ~EvidenceRater() = default;
    virtual int rate(std::string_view misinformation, std::string_view evidence, Level level) const = 0;
};

inline constexpr std::string_view kContextSeparator = "\n\n---\n\n";

struct EvidenceItem {
    Chunk chunk;
    double score = 0.0; // fused retrieval score
    int rating = 0;     // judge rating that admitted it
};

struct EvidenceSet {
    std::vector<EvidenceItem> items;
    std::string context; // item texts joined by kContextSeparator, in rank order
    Level level = Level::low;

    std::vector<std::string> chunk_ids() const;
};

std::string join_context(const std::vector<EvidenceItem>& items);

/// Raised when the rater keeps failing. partial() holds the survivors among
/// the chunks that were rated.
class EvidenceFilterError : public Error {
public:
    EvidenceFilterError(const std::string& what, EvidenceSet partial)
        : Error(what), partial_(std::move(partial)) {}
    const EvidenceSet& partial() const { return partial_; }

private:
    EvidenceSet partial_;
};

struct FilterOptions {
    int pref_threshold = 3;
    std::size_t max_inflight = 4;
};

/// Keeps candidates whose band matches the level and whose rating is at
/// least the threshold; rank order is preserved. Only band matches are rated.
EvidenceSet filter_evidence(const KnowledgeBase& kb, const std::vector<Candidate>& candidates, Level level,
                            std::string_view misinformation, const EvidenceRater& rater,
                            const FilterOptions& opts = {});

struct RetrievalQuery {
    std::string text; // the misinformation statement alone
    Level level = Level::low;
    std::size_t top_k = 10;
    MergeMode merge_mode = MergeMode::union_;
};

/// Keyword + semantic search, fusion and top-k over one knowledge base.
class HybridRetriever {
public:
    HybridRetriever(const KnowledgeBase& kb, const Embedder& embedder, std::size_t pool_size = 50);

    std::vector<Candidate> candidates(const RetrievalQuery& query) const;

    EvidenceSet retrieve(const RetrievalQuery& query, const EvidenceRater& rater,
                         const FilterOptions& opts = {}) const;

    const KnowledgeBase& kb() const { return *kb_; }

private:
    const KnowledgeBase* kb_;
    const Embedder* embedder_;
    KeywordIndex keyword_;
    SemanticIndex semantic_;
    std::size_t pool_size_;
};

} // namespace litctl

#include "litctl/retrieval.hpp"

#include "litctl/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

namespace litctl {

std::string to_string(MergeMode m) { return m == MergeMode::union_ ? "union" : "intersection"; }

MergeMode parse_merge_mode(std::string_view s)
{
    if (s == "union")
        return MergeMode::union_;
    if (s == "intersection")
        return MergeMode::intersection;
    throw InvalidArgument("unknown merge mode '" + std::string(s) + "' (expected union or intersection)");
}

std::vector<std::string> bm25_terms(std::string_view text)
{
    std::vector<std::string> terms;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            terms.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        terms.push_back(std::move(cur));
    return terms;
}

namespace {

bool hit_order(const Hit& a, const Hit& b)
{
    if (a.score != b.score)
        return a.score > b.score;
    return a.chunk_id < b.chunk_id;
}

void keep_top(std::vector<Hit>& hits, std::size_t k)
{
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), hit_order);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), hit_order);
    }
}

} // namespace

KeywordIndex::KeywordIndex(const KnowledgeBase& kb, Bm25Params params) : kb_(&kb), params_(params)
{
    const auto& chunks = kb.chunks();
    tf_.resize(chunks.size());
    length_.resize(chunks.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto terms = bm25_terms(chunks[i].text);
        length_[i] = terms.size();
        total += terms.size();
        for (const auto& t : terms)
            ++tf_[i][t];
        for (const auto& [t, _] : tf_[i])
            ++df_[t];
    }
    if (!chunks.empty())
        avgdl_ = static_cast<double>(total) / static_cast<double>(chunks.size());
}

std::vector<Hit> KeywordIndex::search(std::string_view query, std::size_t k) const
{
    if (tf_.empty())
        throw InvalidArgument("keyword index is empty");
    const auto raw = bm25_terms(query);
    if (raw.empty())
        throw InvalidArgument("query has no searchable terms");
    const std::set<std::string> terms(raw.begin(), raw.end());

    const double n = static_cast<double>(tf_.size());
    std::vector<std::pair<std::string_view, double>> weighted;
    for (const auto& t : terms) {
        auto it = df_.find(t);
        if (it == df_.end())
            continue;
        const double df = static_cast<double>(it->second);
        weighted.emplace_back(t, std::log(1.0 + (n - df + 0.5) / (df + 0.5)));
    }

    std::vector<Hit> hits;
    const auto& chunks = kb_->chunks();
    for (std::size_t i = 0; i < tf_.size(); ++i) {
        const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(length_[i]) / avgdl_);
        double score = 0.0;
        for (const auto& [t, idf] : weighted) {
            auto it = tf_[i].find(t);
            if (it == tf_[i].end())
                continue;
            const double tf = static_cast<double>(it->second);
            score += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
        if (score > 0.0)
            hits.push_back({chunks[i].chunk_id, score});
    }
    keep_top(hits, k);
    return hits;
}

SemanticIndex SemanticIndex::build(const KnowledgeBase& kb, const Embedder& embedder)
{
    std::vector<std::string> texts;
    texts.reserve(kb.chunks().size());
    for (const auto& c : kb.chunks())
        texts.push_back(c.text);
    return SemanticIndex(kb, embedder.embed(texts), embedder.version());
}

SemanticIndex::SemanticIndex(const KnowledgeBase& kb, std::vector<Vector> embeddings, std::string embedder_version)
    : kb_(&kb), vectors_(std::move(embeddings)), version_(std::move(embedder_version))
{
    if (vectors_.size() != kb.chunks().size())
        throw InvalidArgument("expected " + std::to_string(kb.chunks().size()) + " embeddings, got " +
                              std::to_string(vectors_.size()));
    for (auto& v : vectors_) {
        if (v.size() != vectors_.front().size())
            throw InvalidArgument("embeddings have inconsistent dimensions");
        v = normalized(std::move(v));
    }
}

std::vector<Hit> SemanticIndex::search(std::string_view query, std::size_t k, const Embedder& embedder) const
{
    if (vectors_.empty())
        throw InvalidArgument("semantic index is empty");
    if (embedder.version() != version_)
        throw InvalidArgument("index was built with embedder '" + version_ + "' but query uses '" +
                              embedder.version() + "'");
    const std::string q(query);
    const auto qv = embedder.embed(std::span<const std::string>(&q, 1)).at(0);
    if (qv.size() != vectors_.front().size())
        throw InvalidArgument("query embedding dimension " + std::to_string(qv.size()) + " does not match index " +
                              std::to_string(vectors_.front().size()));
    const auto& chunks = kb_->chunks();
    std::vector<Hit> hits;
    hits.reserve(vectors_.size());
    for (std::size_t i = 0; i < vectors_.size(); ++i)
        hits.push_back({chunks[i].chunk_id, dot(qv, vectors_[i])});
    keep_top(hits, k);
    return hits;
}

std::vector<Hit> keyword_search(const KeywordIndex& index, std::string_view query, std::size_t k)
{
    return index.search(query, k);
}

std::vector<Hit> semantic_search(const SemanticIndex& index, std::string_view query, std::size_t k,
                                 const Embedder& embedder)
{
    return index.search(query, k, embedder);
}

std::vector<Candidate> hybrid_merge(const std::vector<Hit>& keyword, const std::vector<Hit>& semantic,
                                    MergeMode mode)
{
    std::unordered_map<std::string, Candidate> merged;
    for (std::size_t r = 0; r < keyword.size(); ++r) {
        auto& c = merged[keyword[r].chunk_id];
        c.chunk_id = keyword[r].chunk_id;
        if (c.keyword_rank == 0) {
            c.keyword_rank = r + 1;
            c.fused += 1.0 / (kRrfConstant + static_cast<double>(r + 1));
        }
    }
    for (std::size_t r = 0; r < semantic.size(); ++r) {
        auto& c = merged[semantic[r].chunk_id];
        c.chunk_id = semantic[r].chunk_id;
        if (c.semantic_rank == 0) {
            c.semantic_rank = r + 1;
            c.fused += 1.0 / (kRrfConstant + static_cast<double>(r + 1));
        }
    }
    std::vector<Candidate> out;
    out.reserve(merged.size());
    for (auto& [_, c] : merged)
        if (mode == MergeMode::union_ || (c.keyword_rank && c.semantic_rank))
            out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fused != b.fused)
            return a.fused > b.fused;
        return a.chunk_id < b.chunk_id;
    });
    return out;
}

std::vector<Candidate> select_top_k(std::vector<Candidate> candidates, std::size_t k)
{
    if (k == 0)
        throw InvalidArgument("top_k must be at least 1");
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fused != b.fused)
            return a.fused > b.fused;
        return a.chunk_id < b.chunk_id;
    });
    if (candidates.size() > k)
        candidates.resize(k);
    return candidates;
}

std::size_t default_top_k(Level level)
{
    switch (level) {
    case Level::low: return 10;
    case Level::medium: return 3;
    case Level::high: return 10;
    }
    throw InvalidArgument("unknown level");
}

std::vector<std::string> EvidenceSet::chunk_ids() const
{
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const auto& it : items)
        ids.push_back(it.chunk.chunk_id);
    return ids;
}

std::string join_context(const std::vector<EvidenceItem>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out.append(kContextSeparator);
        out.append(items[i].chunk.text);
    }
    return out;
}

EvidenceSet filter_evidence(const KnowledgeBase& kb, const std::vector<Candidate>& candidates, Level level,
                            std::string_view misinformation, const EvidenceRater& rater,
                            const FilterOptions& opts)
{
    const Band want = band_for(level);
    std::vector<const Chunk*> matched;
    std::vector<double> scores;
    for (const auto& c : candidates) {
        const Chunk* chunk = kb.find_chunk(c.chunk_id);
        if (!chunk)
            throw InvalidArgument("candidate '" + c.chunk_id + "' is not in the knowledge base");
        if (chunk->band == want) {
            matched.push_back(chunk);
            scores.push_back(c.fused);
        }
    }

    const auto ratings = bounded_map<int>(matched.size(), opts.max_inflight, [&](std::size_t i) {
        const int r = rater.rate(misinformation, matched[i]->text, level);
        if (r < 1 || r > 5)
            throw ApiError("rating " + std::to_string(r) + " is outside 1..5");
        return r;
    });

    EvidenceSet set;
    set.level = level;
    std::exception_ptr first_error;
    std::string failed_id;
    for (std::size_t i = 0; i < matched.size(); ++i) {
        if (!ratings[i].ok()) {
            if (!first_error) {
                first_error = ratings[i].error;
                failed_id = matched[i]->chunk_id;
            }
            continue;
        }
        if (*ratings[i].value >= opts.pref_threshold)
            set.items.push_back({*matched[i], scores[i], *ratings[i].value});
    }
    set.context = join_context(set.items);
    if (first_error) {
        std::string msg = "rating evidence '" + failed_id + "' failed";
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
            msg += ": ";
            msg += e.what();
        }
        throw EvidenceFilterError(msg, std::move(set));
    }
    return set;
}

HybridRetriever::HybridRetriever(const KnowledgeBase& kb, const Embedder& embedder, std::size_t pool_size)
    : kb_(&kb), embedder_(&embedder), keyword_(kb), semantic_(SemanticIndex::build(kb, embedder)),
      pool_size_(pool_size)
{
    if (kb.empty())
        throw InvalidArgument("knowledge base is empty");
}

std::vector<Candidate> HybridRetriever::candidates(const RetrievalQuery& query) const
{
    const std::size_t pool = std::max(pool_size_, query.top_k);
    auto kw = keyword_.search(query.text, pool);
    auto sem = semantic_.search(query.text, pool, *embedder_);
    return select_top_k(hybrid_merge(kw, sem, query.merge_mode), query.top_k);
}

EvidenceSet HybridRetriever::retrieve(const RetrievalQuery& query, const EvidenceRater& rater,
                                      const FilterOptions& opts) const
{
    return filter_evidence(*kb_, candidates(query), query.level, query.text, rater, opts);
}

} // namespace litctl

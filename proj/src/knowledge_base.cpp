#include "litctl/knowledge_base.hpp"

#include "litctl/error.hpp"
#include "litctl/util.hpp"

#include "json.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace litctl {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_ws(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        if (j > i)
            out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string utc_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json chunk_to_json(const Chunk& c)
{
    return json{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id},
                {"source", c.source},     {"text", c.text},
                {"fkre_raw", c.fkre.raw}, {"fkre_clamped", c.fkre.clamped},
                {"band", to_string(c.band)}, {"token_count", c.token_count}};
}

Chunk chunk_from_json(const json& j)
{
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.source = j.at("source").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.fkre.raw = j.at("fkre_raw").get<double>();
    c.fkre.clamped = j.at("fkre_clamped").get<double>();
    c.band = parse_band(j.at("band").get<std::string>());
    c.token_count = j.at("token_count").get<std::size_t>();
    if (c.fkre.clamped != FkreScore::from_raw(c.fkre.raw).clamped)
        throw InvalidArgument("fkre_clamped does not match fkre_raw");
    if (c.band != classify_band(c.fkre))
        throw InvalidArgument("band does not match fkre_clamped");
    if (c.token_count == 0)
        throw InvalidArgument("token_count must be positive");
    return c;
}

json document_to_json(const DocumentRecord& d)
{
    return json{{"doc_id", d.doc_id}, {"title", d.title}, {"source", d.source},
                {"text", d.text},     {"ingested_at", d.ingested_at}};
}

DocumentRecord document_from_json(const json& j)
{
    return {j.at("doc_id").get<std::string>(), j.at("title").get<std::string>(),
            j.at("source").get<std::string>(), j.at("text").get<std::string>(),
            j.at("ingested_at").get<std::string>()};
}

template <typename F>
void for_each_jsonl(const std::string& path, F&& fn)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty())
            continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        } catch (const InvalidArgument& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        }
    }
}

} // namespace

std::string normalize_whitespace(std::string_view text)
{
    std::string out;
    for (auto w : split_ws(text)) {
        if (!out.empty())
            out.push_back(' ');
        out.append(w);
    }
    return out;
}

std::string chunk_id_for(std::string_view doc_id, std::size_t ordinal)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", ordinal);
    return std::string(doc_id) + "#" + buf;
}

std::vector<WordWindow> chunk_windows(std::size_t n_words, const ChunkConfig& cfg)
{
    if (cfg.chunk_size == 0 || cfg.overlap >= cfg.chunk_size)
        throw InvalidArgument("chunking requires 0 <= overlap < chunk_size");
    std::vector<WordWindow> windows;
    if (n_words == 0)
        return windows;
    const std::size_t step = cfg.chunk_size - cfg.overlap;
    for (std::size_t start = 0;; start += step) {
        const std::size_t end = std::min(start + cfg.chunk_size, n_words);
        const bool partial = end - start < cfg.chunk_size;
        // A tail adding fewer than min_tail new words merges into its
        // predecessor, unless that would overflow chunk_size + overlap.
        if (partial && !windows.empty() && end - windows.back().end < cfg.min_tail &&
            end - windows.back().begin <= cfg.chunk_size + cfg.overlap) {
            windows.back().end = end;
        } else {
            windows.push_back({start, end});
        }
        if (end == n_words)
            break;
    }
    return windows;
}

std::vector<Chunk> chunk_document(const DocumentRecord& doc, const ChunkConfig& cfg)
{
    const auto words = split_ws(doc.text);
    const auto windows = chunk_windows(words.size(), cfg);
    std::vector<Chunk> chunks;
    chunks.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        Chunk c;
        c.chunk_id = chunk_id_for(doc.doc_id, i);
        c.doc_id = doc.doc_id;
        c.source = doc.source;
        for (std::size_t w = windows[i].begin; w < windows[i].end; ++w) {
            if (w > windows[i].begin)
                c.text.push_back(' ');
            c.text.append(words[w]);
        }
        try {
            c.fkre = fkre_score(c.text);
        } catch (const InvalidArgument&) {
            throw InvalidArgument("chunk " + c.chunk_id + " has no scoreable words");
        }
        c.band = classify_band(c.fkre);
        c.token_count = windows[i].end - windows[i].begin;
        chunks.push_back(std::move(c));
    }
    return chunks;
}

const DocumentRecord& KnowledgeBase::ingest_document(std::string_view raw_text,
                                                     const DocumentMetadata& meta)
{
    DocumentRecord rec;
    rec.text = normalize_whitespace(raw_text);
    if (rec.text.empty())
        throw InvalidArgument("document text is empty");
    rec.doc_id = meta.doc_id ? *meta.doc_id : "doc-" + sha256_hex(rec.text).substr(0, 12);
    if (rec.doc_id.empty())
        throw InvalidArgument("doc_id is empty");
    if (documents_.contains(rec.doc_id))
        throw InvalidArgument("duplicate doc_id '" + rec.doc_id + "'");
    rec.title = meta.title;
    rec.source = meta.source;
    rec.ingested_at = meta.ingested_at ? *meta.ingested_at : utc_now();
    auto [it, _] = documents_.emplace(rec.doc_id, std::move(rec));
    return it->second;
}

std::size_t KnowledgeBase::add_document(std::string_view raw_text, const DocumentMetadata& meta,
                                        const ChunkConfig& cfg)
{
    // validate the config before the document is recorded
    chunk_windows(0, cfg);
    const auto& doc = ingest_document(raw_text, meta);
    auto chunks = chunk_document(doc, cfg);
    const std::size_t n = chunks.size();
    add_chunks(std::move(chunks));
    return n;
}

void KnowledgeBase::add_chunks(std::vector<Chunk> chunks)
{
    for (auto& c : chunks) {
        if (!chunk_index_.emplace(c.chunk_id, chunks_.size()).second)
            throw InvalidArgument("duplicate chunk_id '" + c.chunk_id + "'");
        chunks_.push_back(std::move(c));
    }
}

const Chunk* KnowledgeBase::find_chunk(std::string_view chunk_id) const
{
    auto it = chunk_index_.find(chunk_id);
    return it == chunk_index_.end() ? nullptr : &chunks_[it->second];
}

std::string documents_path(const std::string& index_path)
{
    std::filesystem::path p(index_path);
    auto stem = p.stem().string();
    return (p.parent_path() / (stem + ".docs.jsonl")).string();
}

void save_index(const KnowledgeBase& kb, const std::string& path)
{
    std::string out;
    for (const auto& c : kb.chunks())
        out += chunk_to_json(c).dump() + "\n";
    write_file(path, out);

    const auto docs_path = documents_path(path);
    if (kb.documents().empty()) {
        std::error_code ec;
        std::filesystem::remove(docs_path, ec);
        return;
    }
    std::string docs;
    for (const auto& [id, d] : kb.documents())
        docs += document_to_json(d).dump() + "\n";
    write_file(docs_path, docs);
}

KnowledgeBase load_index(const std::string& path)
{
    KnowledgeBase kb;
    std::vector<Chunk> chunks;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](const json& j) {
        auto c = chunk_from_json(j);
        if (!seen.insert(c.chunk_id).second)
            throw InvalidArgument("duplicate chunk_id '" + c.chunk_id + "'");
        chunks.push_back(std::move(c));
    });

    const auto docs_path = documents_path(path);
    if (std::filesystem::exists(docs_path)) {
        for_each_jsonl(docs_path, [&](const json& j) {
            auto d = document_from_json(j);
            kb.ingest_document(d.text, {d.doc_id, d.title, d.source, d.ingested_at});
        });
    }
    kb.add_chunks(std::move(chunks));
    return kb;
}

} // namespace litctl

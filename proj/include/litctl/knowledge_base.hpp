#pragma once

#include "litctl/readability.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litctl {

struct DocumentRecord {
    std::string doc_id;
    std::string title;
    std::string source; // publisher, e.g. "CDC"
    std::string text;   // whitespace-normalized
    std::string ingested_at;

    bool operator==(const DocumentRecord&) const = default;
};

struct DocumentMetadata {
    std::optional<std::string> doc_id; // derived from the text hash when absent
    std::string title;
    std::string source;
    std::optional<std::string> ingested_at; // current UTC time when absent
};

/// A retrievable window of a document with its readability label.
struct Chunk {
    std::string chunk_id; // "<doc_id>#<ordinal, 4 digits>"
    std::string doc_id;
    std::string source;
    std::string text;
    FkreScore fkre;
    Band band = Band::hard;
    std::size_t token_count = 0;

    bool operator==(const Chunk&) const = default;
};

struct ChunkConfig {
    std::size_t chunk_size = 200; // words
    std::size_t overlap = 50;     // words
    std::size_t min_tail = 20;    // a final window adding fewer new words merges into its predecessor
};

/// Half-open word range [begin, end).
struct WordWindow {
    std::size_t begin;
    std::size_t end;
    bool operator==(const WordWindow&) const = default;
};

/// Sliding windows over `n_words` words. Throws InvalidArgument unless
/// 0 <= overlap < chunk_size.
std::vector<WordWindow> chunk_windows(std::size_t n_words, const ChunkConfig& cfg);

std::vector<Chunk> chunk_document(const DocumentRecord& doc, const ChunkConfig& cfg = {});

std::string chunk_id_for(std::string_view doc_id, std::size_t ordinal);

/// Single-writer while building; read-only afterwards.
class KnowledgeBase {
public:
    /// Normalizes whitespace, assigns a doc_id if needed and stores the record.
    /// Throws InvalidArgument on empty text or duplicate doc_id.
    const DocumentRecord& ingest_document(std::string_view raw_text, const DocumentMetadata& meta);

    /// Ingests and chunks in one step. Returns the number of chunks added.
    std::size_t add_document(std::string_view raw_text, const DocumentMetadata& meta,
                             const ChunkConfig& cfg = {});

    void add_chunks(std::vector<Chunk> chunks);

    const std::vector<Chunk>& chunks() const { return chunks_; }
    const std::map<std::string, DocumentRecord>& documents() const { return documents_; }
    const Chunk* find_chunk(std::string_view chunk_id) const;
    bool empty() const { return chunks_.empty(); }

    bool operator==(const KnowledgeBase&) const = default;

private:
    std::map<std::string, DocumentRecord> documents_;
    std::vector<Chunk> chunks_;
    std::map<std::string, std::size_t, std::less<>> chunk_index_;
};

std::string normalize_whitespace(std::string_view text);

/// Path of the document sidecar written next to an index.
std::string documents_path(const std::string& index_path);

/// Writes one chunk per line to `path` (kb.jsonl schema) and, when the base
/// holds documents, their records to documents_path(path).
void save_index(const KnowledgeBase& kb, const std::string& path);

/// Throws ParseError with the 1-based line of the first malformed record.
KnowledgeBase load_index(const std::string& path);

} // namespace litctl

#pragma once

#include "litctl/embedding.hpp"
#include "litctl/evaluation.hpp"
#include "litctl/generation.hpp"
#include "litctl/grpo.hpp"
#include "litctl/retrieval.hpp"
#include "litctl/reward.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace litctl {

enum class ClientMode { simulated, mock, http };

struct ClientConfig {
    ClientMode mode = ClientMode::simulated;
    std::string mock_responses;                     // mock mode: generator fixtures
    std::string generator_model = "llama-3.1-8b-instruct";
    std::string judge_model = "gpt-4o-mini-2024-07-18";   // preference judge
    std::string factual_model = "gpt-4o-mini-2024-07-18"; // factual judge
    std::string embedder = "hashing";                     // hashing | http
    std::string embedding_model = "text-embedding-3-small";
    std::size_t embedding_dim = 256;
    std::uint64_t embedding_seed = 0x5eed;
    std::string politeness = "lexicon"; // lexicon | fixture | http | judge
    std::string politeness_fixture;
    std::string politeness_model = "multilingual-politeness";
    int retry_attempts = 3;
    int retry_base_delay_ms = 500;
};

struct PipelineConfig {
    std::string kb_path;
    std::string dataset_path;
    std::vector<Level> levels{Level::low, Level::medium, Level::high};
    std::string split = "all"; // all | train | eval
    double train_fraction = 0.8;

    MergeMode merge_mode = MergeMode::union_;
    std::map<Level, std::size_t> top_k{{Level::low, 10}, {Level::medium, 3}, {Level::high, 10}};
    std::size_t pool_size = 50;
    int pref_threshold = 3;

    RewardConfig reward;
    GrpoConfig grpo;
    GenerationConfig generation;
    bool optimize = false; // best-of-n over a sampled group instead of one greedy response

    ClientConfig clients;
    std::uint64_t seed = 7;
    double failure_threshold = 0.10;
    std::size_t max_inflight = 4;

    void validate() const;
};

/// Parses pipeline.toml. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::string& path);

/// Canonical JSON (sorted keys) of the whole configuration.
nlohmann::json to_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

/// Owning bundle of the external collaborators a run needs.
struct Clients {
    std::unique_ptr<ChatClient> generator;
    std::unique_ptr<ChatClient> judge;
    std::unique_ptr<ChatClient> factual;
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<PolitenessScorer> politeness;
    RetryPolicy retry;

    EvalClients eval_clients(std::size_t max_inflight) const;
};

/// http mode reads LF_API_BASE / LF_API_KEY.
Clients make_clients(const ClientConfig& cfg);

/// JSONL {post_id, text, source_dataset, topic?}. Order is preserved.
/// Throws ParseError with the line number, Error("no records") when empty.
std::vector<MisinfoPost> load_dataset(const std::string& path);

struct DatasetSplit {
    std::vector<MisinfoPost> train;
    std::vector<MisinfoPost> eval;
};

/// Deterministic split: posts are ordered by a seeded hash of post_id and
/// the first round(fraction * n) go to train. Membership does not depend on
/// input order. Original order is kept within each part.
DatasetSplit split_dataset(const std::vector<MisinfoPost>& posts, std::uint64_t seed, double train_fraction = 0.8);

/// The pipeline's view of a finished (post, level) item.
struct ItemResult {
    std::string post_id;
    std::string misinformation;
    Level level = Level::low;
    std::optional<EvidenceSet> evidence;
    std::optional<Counterspeech> counterspeech;
    std::vector<double> candidate_rewards; // optimize mode
    EvalRecord record;
    std::string error; // first stage failure, empty on success
};

struct RunResult {
    std::string config_hash;
    std::vector<ItemResult> items;
    EvalReport report;
    std::size_t failed = 0;
};

/// Raised when more than failure_threshold of the items failed. Artifacts
/// are written before it is thrown.
class PipelineFailed : public Error {
public:
    using Error::Error;
};

/// retrieve -> filter -> prompt -> generate (or best-of-n) -> evaluate for
/// every post x level, writing evidence.jsonl, counterspeech.jsonl,
/// report.md, report.csv and manifest.json into out_dir. Loads the index
/// and dataset named in the config.
RunResult run_pipeline(const PipelineConfig& cfg, const std::string& out_dir, const Clients& clients);

/// Same, over an already loaded index and post list.
RunResult run_pipeline(const PipelineConfig& cfg, const std::string& out_dir, const Clients& clients,
                       const KnowledgeBase& kb, const std::vector<MisinfoPost>& posts);

struct SweepRow {
    Level level = Level::low;
    std::size_t k = 0;
    LevelSummary summary;
};

struct SweepTable {
    std::vector<SweepRow> rows; // level-major, k in the order given

    std::string csv() const;
    std::string markdown() const;
};

/// One run per k (applied to every level) under out_dir/top_<k>; writes
/// sweep.csv and sweep.md. Needs at least two k values.
SweepTable topk_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& k_values,
                      const std::string& out_dir, const Clients& clients);

/// Reward definition handed to an external trainer.
nlohmann::json reward_spec(const PipelineConfig& cfg, Level level);
std::string reward_spec_hash(const nlohmann::json& spec);

/// Writes one training task per post x level (prompt with filtered
/// evidence, level, reward_spec, its hash, split) and a manifest next to
/// `out_path`. Returns the number of tasks.
std::size_t export_training(const PipelineConfig& cfg, const std::string& out_path, const Clients& clients);

/// Counterspeech records as written by run_pipeline.
nlohmann::json to_json(const Counterspeech& cs);
Counterspeech counterspeech_from_json(const nlohmann::json& j);

/// Reads counterspeech.jsonl into evaluation items. Records without text
/// become failed items.
std::vector<EvalItem> load_counterspeech(const std::string& path);

/// Tabular fixture: JSONL {response_id, fkre, rating}.
struct TabularResponse {
    std::string response_id;
    double fkre = 0.0;
    int rating = 3;
};
std::vector<TabularResponse> load_tabular_fixture(const std::string& path);
std::vector<double> tabular_rewards(const std::vector<TabularResponse>& responses, const RewardConfig& reward);

} // namespace litctl

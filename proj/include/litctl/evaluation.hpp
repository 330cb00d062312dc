#pragma once

#include "litctl/chat.hpp"
#include "litctl/generation.hpp"
#include "litctl/stats.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litctl {

struct JudgeRating {
    int rating = 0; // 1..5
    Level judge_level = Level::low;
    std::string raw_reply;
    std::string model_id;

    double preference() const { return preference_reward(rating); }
};

struct FactualLabel {
    int label = 0; // 1 = factually correct
    std::string explanation;
    std::string raw_reply;
};

/// Judge reply that could not be parsed, even after one re-ask.
class JudgeParseError : public Error {
public:
    using Error::Error;
};

/// First integer in 1..5 appearing in the reply, if any.
std::optional<int> extract_rating(std::string_view reply);

/// "Label: 0|1", case-insensitive, plus any text following "Explanations:".
std::optional<FactualLabel> extract_factual(std::string_view reply);

std::string preference_prompt(std::string_view misinformation, std::string_view counterspeech, Level user_level);
std::string factual_prompt(std::string_view counterspeech);
std::string politeness_prompt(std::string_view text);

/// Greedy judge calls; transport failures are retried under `retry`, a
/// parse failure triggers exactly one re-ask.
JudgeRating judge_preference(const ChatClient& client, std::string_view counterspeech,
                             std::string_view misinformation, Level user_level, const RetryPolicy& retry = {});
FactualLabel judge_factual(const ChatClient& client, std::string_view counterspeech, const RetryPolicy& retry = {});

/// Adapts a preference judge for evidence filtering: the chunk text is
/// rated in place of a counterspeech.
class JudgeEvidenceRater final : public EvidenceRater {
public:
    JudgeEvidenceRater(const ChatClient& client, RetryPolicy retry = {}) : client_(&client), retry_(retry) {}
    int rate(std::string_view misinformation, std::string_view evidence, Level level) const override;

private:
    const ChatClient* client_;
    RetryPolicy retry_;
};

/// Scores politeness in [0, 1]. Must be safe to call concurrently.
class PolitenessScorer {
public:
    virtual ~PolitenessScorer() = default;
    /// Throws InvalidArgument on empty text.
    virtual double score(std::string_view text) const = 0;
    virtual std::string id() const = 0;
};

/// Marker-word heuristic: 0.5 baseline, +0.1 per polite and -0.2 per rude
/// marker, clamped to [0, 1].
double lexicon_politeness(std::string_view text);

class LexiconPolitenessScorer final : public PolitenessScorer {
public:
    double score(std::string_view text) const override;
    std::string id() const override { return "lexicon-v1"; }
};

/// Exact-text lookup from JSONL lines {"text": ..., "score": ...}.
class FixturePolitenessScorer final : public PolitenessScorer {
public:
    FixturePolitenessScorer() = default;
    static FixturePolitenessScorer from_file(const std::string& path);
    void add(std::string text, double score);
    double score(std::string_view text) const override;
    std::string id() const override { return "fixture"; }

private:
    std::map<std::string, double, std::less<>> scores_;
};

/// POST {base}/classify {"text"} expecting {"score": p} with p in [0, 1].
class HttpPolitenessScorer final : public PolitenessScorer {
public:
    HttpPolitenessScorer(Endpoint endpoint, std::string model, RetryPolicy retry = {});
    double score(std::string_view text) const override;
    std::string id() const override { return "http:" + model_; }

private:
    Endpoint endpoint_;
    std::string model_;
    RetryPolicy retry_;
};

/// Asks a chat judge for a 1..5 politeness rating mapped to (r - 1) / 4.
class JudgePolitenessScorer final : public PolitenessScorer {
public:
    JudgePolitenessScorer(const ChatClient& client, RetryPolicy retry = {}) : client_(&client), retry_(retry) {}
    double score(std::string_view text) const override;
    std::string id() const override { return "judge:" + client_->model_id(); }

private:
    const ChatClient* client_;
    RetryPolicy retry_;
};

struct EvalClients {
    const ChatClient* preference_judge = nullptr;
    const ChatClient* factual_judge = nullptr;
    const PolitenessScorer* politeness = nullptr;
    RetryPolicy retry;
    std::size_t max_inflight = 4;
};

/// A counterspeech to evaluate together with the post it answers.
struct EvalItem {
    std::string post_id;
    std::string misinformation;
    Counterspeech counterspeech;
};

struct EvalRecord {
    std::string post_id;
    Level level = Level::low; // level the counterspeech was written for
    std::string text;
    double fkre = 0.0; // clamped
    double target_distance = 0.0;
    std::optional<double> politeness;
    std::optional<int> rating;
    std::optional<double> preference; // rating / 5, judged at `level`
    std::optional<int> factual;
    std::string factual_explanation;
    bool refusal = false;
    std::vector<std::string> errors;

    bool failed() const { return !errors.empty(); }
    /// SHA-256 of the canonical JSON of this record.
    std::string hash() const;
};

nlohmann::json to_json(const EvalRecord& r);

/// One counterspeech through all four metrics. Metric failures and refusals
/// are recorded in `errors`, never thrown.
EvalRecord evaluate_one(const EvalItem& item, const EvalClients& clients);

struct LevelSummary {
    Level level = Level::low;
    std::size_t n = 0;      // records for this level
    std::size_t failed = 0; // excluded from the aggregates
    std::optional<MeanVar> politeness;
    std::optional<MeanVar> target_distance;
    std::optional<MeanVar> preference;
    std::optional<double> factual_accuracy;
};

struct AverageRow {
    std::optional<MeanVar> politeness; // mean/variance averaged over levels
    std::optional<MeanVar> target_distance;
    std::optional<MeanVar> preference;
    std::optional<double> factual_accuracy;
};

struct EvalReport {
    std::vector<LevelSummary> levels;
    AverageRow average;
    std::vector<EvalRecord> records;
    std::vector<std::string> record_hashes;
};

/// Aggregates records into per-level mean (population variance) and an
/// unweighted average over the levels present. Throws Error("no records").
EvalReport aggregate(std::vector<EvalRecord> records);

EvalReport evaluate_corpus(const std::vector<EvalItem>& items, const EvalClients& clients);

/// Table-1 style CSV and Markdown. `config_hash` is written on every row.
std::string report_csv(const EvalReport& report, std::string_view config_hash = "");
std::string report_markdown(const EvalReport& report, std::string_view title, std::string_view config_hash = "");

/// cell[i][j] = preference of users at level j for counterspeech written for level i.
struct CrossEvalMatrix {
    std::array<std::array<MeanVar, 3>, 3> cell{};
    std::size_t failed = 0;

    bool strictly_diagonally_dominant() const;
    std::string csv() const;
    std::string markdown() const;
};

/// Every counterspeech level must be present. Failed judge calls are
/// counted and skipped.
CrossEvalMatrix cross_eval(const std::map<Level, std::vector<EvalItem>>& by_level, const ChatClient& judge,
                           const RetryPolicy& retry = {}, std::size_t max_inflight = 4);

} // namespace litctl

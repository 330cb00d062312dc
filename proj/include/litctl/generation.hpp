#pragma once

#include "litctl/chat.hpp"
#include "litctl/retrieval.hpp"
#include "litctl/reward.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litctl {

enum class SourceDataset { misinfo_literacy, misinfo_correct, check_covid };

std::string to_string(SourceDataset d);
SourceDataset parse_source_dataset(std::string_view s);

struct MisinfoPost {
    std::string post_id;
    std::string text;
    std::string topic;
    SourceDataset source_dataset = SourceDataset::misinfo_literacy;
};

/// Missing or unknown slot while rendering a prompt.
class TemplateError : public Error {
public:
    using Error::Error;
};

/// Replaces every "{name}" with slots.at(name) in one pass; substituted text
/// is never rescanned. Braces not forming a known identifier are kept.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& slots);

/// Header, audience and the four criteria for `level`, ending before the
/// misinformation line.
std::string_view generation_template(Level level);

/// Full prompt. With evidence, its context block precedes the final line,
/// which quotes the misinformation.
std::string build_prompt(const MisinfoPost& post, Level level, const EvidenceSet* evidence = nullptr);

struct GenerationConfig {
    int max_new_tokens = 200;
    double temperature = 0.5;
    double top_p = 0.9;
    bool sampling = false; // greedy for single responses, sampling for groups
    std::string model_id;
    std::uint64_t seed = 0;

    void validate() const;
    ChatRequest request(std::string prompt, std::uint64_t seed) const;
};

struct Provenance {
    std::string prompt_sha256;
    std::string model_id;
    std::uint64_t seed = 0;
    std::vector<std::string> evidence_chunk_ids;
    std::vector<std::string> candidate_sha256; // best-of-n candidates, if any
    std::optional<std::size_t> selected_index;
};

struct Counterspeech {
    std::string text;
    Level level = Level::low;
    FkreScore fkre;
    std::optional<RewardBreakdown> reward;
    Provenance provenance;
    bool refusal = false;
};

/// Removes leading role labels ("Assistant:", "Counterspeech:" ...) and one
/// pair of surrounding quotes; nothing else is rewritten.
std::string clean_completion(std::string_view raw);

/// Heuristic: the text opens with a refusal phrase such as "I can't help".
bool looks_like_refusal(std::string_view text);

/// One completion, retried on transport failures. Throws Error("empty
/// generation") when nothing is left after cleaning.
Counterspeech generate(const ChatClient& client, const std::string& prompt, Level level,
                       const GenerationConfig& cfg, std::vector<std::string> evidence_chunk_ids = {},
                       const RetryPolicy& retry = {});

/// n sampled completions with seeds derive_seed(cfg.seed, i), in index order.
/// Requires n >= 2 and cfg.sampling. Failures name the sample index.
std::vector<Counterspeech> generate_group(const ChatClient& client, const std::string& prompt, Level level,
                                          const GenerationConfig& cfg, std::size_t n,
                                          std::vector<std::string> evidence_chunk_ids = {},
                                          const RetryPolicy& retry = {}, std::size_t max_inflight = 4);

} // namespace litctl

#include "litctl/generation.hpp"

#include "litctl/util.hpp"

#include <array>
#include <cctype>

namespace litctl {

namespace {
#include "prompts.inc"

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

} // namespace

std::string to_string(SourceDataset d)
{
    switch (d) {
    case SourceDataset::misinfo_literacy: return "misinfo_literacy";
    case SourceDataset::misinfo_correct: return "misinfo_correct";
    case SourceDataset::check_covid: return "check_covid";
    }
    throw InvalidArgument("unknown source dataset");
}

SourceDataset parse_source_dataset(std::string_view s)
{
    if (s == "misinfo_literacy")
        return SourceDataset::misinfo_literacy;
    if (s == "misinfo_correct")
        return SourceDataset::misinfo_correct;
    if (s == "check_covid")
        return SourceDataset::check_covid;
    throw InvalidArgument("unknown source_dataset '" + std::string(s) + "'");
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& slots)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && ident_char(tmpl[j]))
                ++j;
            if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
                const auto name = tmpl.substr(i + 1, j - i - 1);
                auto it = slots.find(name);
                if (it == slots.end())
                    throw TemplateError("template slot {" + std::string(name) + "} has no value");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string_view generation_template(Level level)
{
    switch (level) {
    case Level::low: return kGenerationLow;
    case Level::medium: return kGenerationMedium;
    case Level::high: return kGenerationHigh;
    }
    throw TemplateError("no template for level");
}

std::string build_prompt(const MisinfoPost& post, Level level, const EvidenceSet* evidence)
{
    if (trim_copy(post.text).empty())
        throw InvalidArgument("post '" + post.post_id + "' has empty text");
    std::string tmpl(generation_template(level));
    std::map<std::string, std::string, std::less<>> slots{{"comment", post.text}};
    if (evidence && !evidence->items.empty()) {
        tmpl += kEvidenceBlock;
        slots["context"] = evidence->context;
    }
    tmpl += kMisinfoLine;
    return render_template(tmpl, slots);
}

void GenerationConfig::validate() const
{
    if (max_new_tokens <= 0)
        throw InvalidArgument("max_new_tokens must be positive");
    if (!(temperature >= 0.0))
        throw InvalidArgument("temperature must be non-negative");
    if (!(top_p > 0.0 && top_p <= 1.0))
        throw InvalidArgument("top_p must be in (0, 1]");
}

ChatRequest GenerationConfig::request(std::string prompt, std::uint64_t s) const
{
    auto req = user_request(std::move(prompt));
    req.max_tokens = max_new_tokens;
    if (sampling) {
        req.temperature = temperature;
        req.top_p = top_p;
    } else {
        req.temperature = 0.0;
        req.top_p = 1.0;
    }
    req.seed = s;
    return req;
}

std::string clean_completion(std::string_view raw)
{
    static constexpr std::array<std::string_view, 5> kLabels = {"assistant:", "counterspeech:", "counter-speech:",
                                                                "response:", "answer:"};
    std::string text = trim_copy(raw);
    for (bool stripped = true; stripped;) {
        stripped = false;
        const auto lower = to_lower(text.substr(0, 20));
        for (auto label : kLabels)
            if (lower.starts_with(label)) {
                text = trim_copy(std::string_view(text).substr(label.size()));
                stripped = true;
                break;
            }
    }
    auto quoted = [&](std::string_view open, std::string_view close) {
        return text.size() >= open.size() + close.size() && text.starts_with(open) && text.ends_with(close);
    };
    if (quoted("\"", "\""))
        text = trim_copy(std::string_view(text).substr(1, text.size() - 2));
    else if (quoted("“", "”"))
        text = trim_copy(std::string_view(text).substr(3, text.size() - 6));
    return text;
}

bool looks_like_refusal(std::string_view text)
{
    static constexpr std::array<std::string_view, 8> kPhrases = {
        "i can't", "i cannot", "i can not", "i'm sorry, but", "i am sorry, but",
        "i'm unable", "i am unable", "as an ai",
    };
    const auto head = to_lower(text.substr(0, 80));
    for (auto p : kPhrases)
        if (head.starts_with(p))
            return true;
    return false;
}

Counterspeech generate(const ChatClient& client, const std::string& prompt, Level level,
                       const GenerationConfig& cfg, std::vector<std::string> evidence_chunk_ids,
                       const RetryPolicy& retry)
{
    cfg.validate();
    const auto req = cfg.request(prompt, cfg.seed);
    const auto raw = with_retries(retry, [&] { return client.complete(req); });
    Counterspeech cs;
    cs.text = clean_completion(raw);
    if (cs.text.empty())
        throw Error("empty generation");
    cs.level = level;
    cs.fkre = fkre_score(cs.text);
    cs.refusal = looks_like_refusal(cs.text);
    cs.provenance.prompt_sha256 = prompt_hash(req);
    cs.provenance.model_id = cfg.model_id.empty() ? client.model_id() : cfg.model_id;
    cs.provenance.seed = cfg.seed;
    cs.provenance.evidence_chunk_ids = std::move(evidence_chunk_ids);
    return cs;
}

std::vector<Counterspeech> generate_group(const ChatClient& client, const std::string& prompt, Level level,
                                          const GenerationConfig& cfg, std::size_t n,
                                          std::vector<std::string> evidence_chunk_ids, const RetryPolicy& retry,
                                          std::size_t max_inflight)
{
    if (n < 2)
        throw InvalidArgument("group generation needs n >= 2");
    if (!cfg.sampling)
        throw InvalidArgument("group generation needs sampling enabled");
    auto outcomes = bounded_map<Counterspeech>(n, max_inflight, [&](std::size_t i) {
        auto sub = cfg;
        sub.seed = derive_seed(cfg.seed, i);
        return generate(client, prompt, level, sub, evidence_chunk_ids, retry);
    });
    std::vector<Counterspeech> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!outcomes[i].ok()) {
            try {
                std::rethrow_exception(outcomes[i].error);
            } catch (const std::exception& e) {
                throw Error("sample " + std::to_string(i) + " failed: " + e.what());
            }
        }
        out.push_back(std::move(*outcomes[i].value));
    }
    return out;
}

} // namespace litctl

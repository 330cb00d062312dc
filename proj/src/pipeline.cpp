#include "litctl/pipeline.hpp"

#include "litctl/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <set>
#include <sstream>

namespace litctl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename F>
void for_each_jsonl(const std::string& path, F&& fn)
{
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
        }
        try {
            fn(j, lineno);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
}

std::string required_string(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_string())
        throw InvalidArgument(std::string("missing string field '") + key + "'");
    return j.at(key).get<std::string>();
}

void require_file(const std::string& path, const char* what)
{
    if (path.empty())
        throw InvalidArgument(std::string(what) + " is not set");
    if (!fs::exists(path))
        throw InvalidArgument(std::string(what) + " does not exist: " + path);
}

json reward_json(const std::optional<RewardBreakdown>& r)
{
    if (!r)
        return nullptr;
    return {{"r_read", r->r_read}, {"r_pref", r->r_pref}, {"total", r->total}};
}

std::string fmt_opt(const std::optional<MeanVar>& mv, bool mean)
{
    return mv ? format_fixed(mean ? mv->mean : mv->variance, 6) : "";
}

std::string cell(const std::optional<MeanVar>& mv)
{
    return mv ? format_fixed(mv->mean, 3) + " (" + format_fixed(mv->variance, 3) + ")" : "n/a";
}

// Everything a (post, level) item needs before generation.
struct Prepared {
    EvidenceSet evidence;
    std::string prompt;
};

class ItemRunner {
public:
    ItemRunner(const PipelineConfig& cfg, const Clients& clients, const KnowledgeBase& kb)
        : cfg_(cfg), clients_(clients), retriever_(kb, *clients.embedder, cfg.pool_size),
          rater_(*clients.judge, clients.retry)
    {
    }

    Prepared prepare(const MisinfoPost& post, Level level) const
    {
        RetrievalQuery q{post.text, level, cfg_.top_k.at(level), cfg_.merge_mode};
        FilterOptions opts{cfg_.pref_threshold, cfg_.max_inflight};
        Prepared p;
        p.evidence = retriever_.retrieve(q, rater_, opts);
        p.prompt = build_prompt(post, level, &p.evidence);
        return p;
    }

    ItemResult run(const MisinfoPost& post, Level level, std::uint64_t seed) const
    {
        ItemResult out;
        out.post_id = post.post_id;
        out.misinformation = post.text;
        out.level = level;
        out.record.post_id = post.post_id;
        out.record.level = level;

        std::string stage = "retrieval";
        try {
            auto prepared = prepare(post, level);
            out.evidence = prepared.evidence;
            const auto ids = prepared.evidence.chunk_ids();

            stage = "generation";
            RewardConfig rc = cfg_.reward;
            rc.level = level;
            GenerationConfig gen = cfg_.generation;
            gen.seed = seed;
            gen.model_id = clients_.generator->model_id();
            Counterspeech cs;
            if (cfg_.optimize) {
                gen.sampling = true;
                auto group = generate_group(*clients_.generator, prepared.prompt, level, gen,
                                            cfg_.grpo.n_completions, ids, clients_.retry, 1);
                stage = "candidate scoring";
                std::vector<std::string> hashes;
                std::vector<RewardBreakdown> breakdowns;
                for (const auto& c : group) {
                    hashes.push_back(sha256_hex(c.text));
                    const int rating =
                        judge_preference(*clients_.judge, c.text, post.text, level, clients_.retry).rating;
                    breakdowns.push_back(score_response(c.fkre, std::span<const int>(&rating, 1), rc));
                    out.candidate_rewards.push_back(breakdowns.back().total);
                }
                const auto best = argmax_first(out.candidate_rewards);
                cs = group[best];
                cs.reward = breakdowns[best];
                cs.provenance.candidate_sha256 = std::move(hashes);
                cs.provenance.selected_index = best;
            } else {
                cs = generate(*clients_.generator, prepared.prompt, level, gen, ids, clients_.retry);
            }

            stage = "evaluation";
            out.record = evaluate_one(EvalItem{post.post_id, post.text, cs}, clients_.eval_clients(1));
            if (!cs.reward && out.record.rating)
                cs.reward = score_response(cs.fkre, std::span<const int>(&*out.record.rating, 1), rc);
            out.counterspeech = std::move(cs);
            if (out.record.failed())
                out.error = out.record.errors.front();
        } catch (const std::exception& e) {
            out.error = stage + ": " + e.what();
            out.record.errors.push_back(out.error);
        }
        return out;
    }

private:
    const PipelineConfig& cfg_;
    const Clients& clients_;
    HybridRetriever retriever_;
    JudgeEvidenceRater rater_;
};

std::vector<MisinfoPost> select_split(const PipelineConfig& cfg, const std::vector<MisinfoPost>& posts)
{
    if (cfg.split == "all")
        return posts;
    auto parts = split_dataset(posts, cfg.seed, cfg.train_fraction);
    return cfg.split == "train" ? parts.train : parts.eval;
}

json evidence_row(const ItemResult& r, const std::string& hash, std::size_t top_k)
{
    json chunks = json::array();
    if (r.evidence)
        for (const auto& it : r.evidence->items)
            chunks.push_back({{"chunk_id", it.chunk.chunk_id},
                              {"score", it.score},
                              {"rating", it.rating},
                              {"band", to_string(it.chunk.band)},
                              {"fkre_clamped", it.chunk.fkre.clamped}});
    return {{"config_hash", hash},  {"post_id", r.post_id}, {"level", to_string(r.level)},
            {"top_k", top_k},       {"chunks", chunks},     {"context", r.evidence ? r.evidence->context : ""},
            {"error", r.evidence ? "" : r.error}};
}

json counterspeech_row(const ItemResult& r, const std::string& hash)
{
    json row = r.counterspeech ? to_json(*r.counterspeech) : json{{"level", to_string(r.level)}, {"text", ""}};
    row["config_hash"] = hash;
    row["post_id"] = r.post_id;
    row["misinformation"] = r.misinformation;
    row["error"] = r.error;
    return row;
}

} // namespace

std::vector<MisinfoPost> load_dataset(const std::string& path)
{
    require_file(path, "dataset");
    std::vector<MisinfoPost> posts;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](const json& j, std::size_t) {
        MisinfoPost p;
        p.post_id = required_string(j, "post_id");
        p.text = required_string(j, "text");
        if (trim_copy(p.post_id).empty())
            throw InvalidArgument("empty post_id");
        if (trim_copy(p.text).empty())
            throw InvalidArgument("empty text");
        if (j.contains("source_dataset"))
            p.source_dataset = parse_source_dataset(required_string(j, "source_dataset"));
        if (j.contains("topic"))
            p.topic = required_string(j, "topic");
        if (!seen.insert(p.post_id).second)
            throw InvalidArgument("duplicate post_id '" + p.post_id + "'");
        posts.push_back(std::move(p));
    });
    if (posts.empty())
        throw Error("no records");
    return posts;
}

DatasetSplit split_dataset(const std::vector<MisinfoPost>& posts, std::uint64_t seed, double train_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("train_fraction must be in (0, 1)");
    std::vector<std::pair<std::string, std::string>> keyed; // (hash key, post_id)
    for (const auto& p : posts)
        keyed.emplace_back(sha256_hex(std::to_string(seed) + ":" + p.post_id), p.post_id);
    std::sort(keyed.begin(), keyed.end());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(posts.size())));
    std::set<std::string> train_ids;
    for (std::size_t i = 0; i < n_train; ++i)
        train_ids.insert(keyed[i].second);
    DatasetSplit out;
    for (const auto& p : posts)
        (train_ids.contains(p.post_id) ? out.train : out.eval).push_back(p);
    return out;
}

nlohmann::json to_json(const Counterspeech& cs)
{
    const auto& pv = cs.provenance;
    return {{"text", cs.text},
            {"level", to_string(cs.level)},
            {"fkre_raw", cs.fkre.raw},
            {"fkre_clamped", cs.fkre.clamped},
            {"band", to_string(classify_band(cs.fkre))},
            {"refusal", cs.refusal},
            {"reward", reward_json(cs.reward)},
            {"provenance",
             {{"prompt_sha256", pv.prompt_sha256},
              {"model_id", pv.model_id},
              {"seed", pv.seed},
              {"evidence_chunk_ids", pv.evidence_chunk_ids},
              {"candidate_sha256", pv.candidate_sha256},
              {"selected_index", pv.selected_index ? json(*pv.selected_index) : json(nullptr)}}}};
}

Counterspeech counterspeech_from_json(const nlohmann::json& j)
{
    Counterspeech cs;
    cs.text = j.value("text", "");
    cs.level = parse_level(required_string(j, "level"));
    cs.fkre = fkre_score(cs.text);
    cs.refusal = j.value("refusal", false);
    if (j.contains("reward") && j.at("reward").is_object()) {
        const auto& r = j.at("reward");
        cs.reward = RewardBreakdown{r.at("r_read").get<double>(), r.at("r_pref").get<double>(),
                                    r.at("total").get<double>()};
    }
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        cs.provenance.prompt_sha256 = p.value("prompt_sha256", "");
        cs.provenance.model_id = p.value("model_id", "");
        cs.provenance.seed = p.value("seed", std::uint64_t{0});
        cs.provenance.evidence_chunk_ids = p.value("evidence_chunk_ids", std::vector<std::string>{});
        cs.provenance.candidate_sha256 = p.value("candidate_sha256", std::vector<std::string>{});
        if (p.contains("selected_index") && !p.at("selected_index").is_null())
            cs.provenance.selected_index = p.at("selected_index").get<std::size_t>();
    }
    return cs;
}

std::vector<EvalItem> load_counterspeech(const std::string& path)
{
    require_file(path, "counterspeech file");
    std::vector<EvalItem> items;
    for_each_jsonl(path, [&](const json& j, std::size_t) {
        items.push_back({required_string(j, "post_id"), j.value("misinformation", ""), counterspeech_from_json(j)});
    });
    if (items.empty())
        throw Error("no records");
    return items;
}

RunResult run_pipeline(const PipelineConfig& cfg, const std::string& out_dir, const Clients& clients)
{
    cfg.validate();
    require_file(cfg.kb_path, "kb_path");
    require_file(cfg.dataset_path, "dataset_path");
    const auto kb = load_index(cfg.kb_path);
    return run_pipeline(cfg, out_dir, clients, kb, load_dataset(cfg.dataset_path));
}

RunResult run_pipeline(const PipelineConfig& cfg, const std::string& out_dir, const Clients& clients,
                       const KnowledgeBase& kb, const std::vector<MisinfoPost>& posts)
{
    cfg.validate();
    if (kb.empty())
        throw InvalidArgument("knowledge base is empty");
    const auto started = utc_now();
    const auto hash = config_hash(cfg);
    const auto selected = select_split(cfg, posts);
    if (selected.empty())
        throw InvalidArgument("split '" + cfg.split + "' selects no posts");

    const ItemRunner runner(cfg, clients, kb);
    const std::size_t n_levels = cfg.levels.size();
    const std::size_t n_items = selected.size() * n_levels;
    std::vector<std::uint64_t> seeds(n_items);
    for (std::size_t i = 0; i < n_items; ++i)
        seeds[i] = derive_seed(cfg.seed, i);

    auto outcomes = bounded_map<ItemResult>(n_items, cfg.max_inflight, [&](std::size_t i) {
        return runner.run(selected[i / n_levels], cfg.levels[i % n_levels], seeds[i]);
    });

    RunResult result;
    result.config_hash = hash;
    std::vector<EvalRecord> records;
    for (std::size_t i = 0; i < n_items; ++i) {
        auto& oc = outcomes[i];
        if (!oc.ok()) {
            ItemResult r; // runner.run catches stage errors; this is a last resort
            r.post_id = selected[i / n_levels].post_id;
            r.misinformation = selected[i / n_levels].text;
            r.level = cfg.levels[i % n_levels];
            try {
                std::rethrow_exception(oc.error);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            r.record.post_id = r.post_id;
            r.record.level = r.level;
            r.record.errors.push_back(r.error);
            oc.value.emplace(std::move(r));
        }
        if (oc.value->record.failed())
            ++result.failed;
        records.push_back(oc.value->record);
        result.items.push_back(std::move(*oc.value));
    }
    result.report = aggregate(std::move(records));

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::string evidence, counterspeech;
    for (const auto& r : result.items) {
        evidence += evidence_row(r, hash, cfg.top_k.at(r.level)).dump() + "\n";
        counterspeech += counterspeech_row(r, hash).dump() + "\n";
    }
    std::string md = report_markdown(result.report, "Run report", hash);
    if (result.failed) {
        md += "\n## Failed items\n\n";
        for (const auto& r : result.items)
            if (!r.record.errors.empty())
                md += "- " + r.post_id + " / " + to_string(r.level) + ": " + r.record.errors.front() + "\n";
    }
    const std::map<std::string, std::string> files{{"evidence.jsonl", evidence},
                                                   {"counterspeech.jsonl", counterspeech},
                                                   {"report.csv", report_csv(result.report, hash)},
                                                   {"report.md", md}};
    json digests;
    for (const auto& [name, body] : files) {
        write_file((dir / name).string(), body);
        digests[name] = sha256_hex(body);
    }

    json item_seeds = json::array();
    for (std::size_t i = 0; i < n_items; ++i)
        item_seeds.push_back({{"post_id", selected[i / n_levels].post_id},
                              {"level", to_string(cfg.levels[i % n_levels])},
                              {"seed", seeds[i]}});
    const json manifest{
        {"config_hash", hash},
        {"config", to_json(cfg)},
        {"seed", cfg.seed},
        {"item_seeds", item_seeds},
        {"models",
         {{"generator", clients.generator->model_id()},
          {"preference_judge", clients.judge->model_id()},
          {"factual_judge", clients.factual->model_id()},
          {"embedder", clients.embedder->version()},
          {"politeness", clients.politeness->id()}}},
        {"counts", {{"posts", selected.size()}, {"items", n_items}, {"failed", result.failed}}},
        {"record_hashes", result.report.record_hashes},
        {"outputs", digests},
        {"started_at", started},
        {"finished_at", utc_now()},
    };
    write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    if (double(result.failed) > cfg.failure_threshold * double(n_items))
        throw PipelineFailed(std::to_string(result.failed) + " of " + std::to_string(n_items) +
                             " items failed (threshold " + format_fixed(cfg.failure_threshold * 100.0, 1) +
                             "%); see " + (dir / "report.md").string());
    return result;
}

std::string SweepTable::csv() const
{
    std::string out = "level,k,n,failed,politeness_mean,politeness_var,target_distance_mean,target_distance_var,"
                      "preference_mean,preference_var,factual_accuracy\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out += to_string(r.level) + "," + std::to_string(r.k) + "," + std::to_string(s.n) + "," +
               std::to_string(s.failed) + "," + fmt_opt(s.politeness, true) + "," + fmt_opt(s.politeness, false) +
               "," + fmt_opt(s.target_distance, true) + "," + fmt_opt(s.target_distance, false) + "," +
               fmt_opt(s.preference, true) + "," + fmt_opt(s.preference, false) + "," +
               (s.factual_accuracy ? format_fixed(*s.factual_accuracy, 6) : "") + "\n";
    }
    return out;
}

std::string SweepTable::markdown() const
{
    std::string out = "| Level | Top-k | Politeness | Target Distance | User Preference | Factual Accuracy |\n"
                      "|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out += "| " + to_string(r.level) + " | top_" + std::to_string(r.k) + " | " + cell(s.politeness) + " | " +
               cell(s.target_distance) + " | " + cell(s.preference) + " | " +
               (s.factual_accuracy ? format_fixed(*s.factual_accuracy, 3) : "n/a") + " |\n";
    }
    out += "\nCells are mean (population variance).\n";
    return out;
}

SweepTable topk_sweep(const PipelineConfig& cfg, const std::vector<std::size_t>& k_values,
                      const std::string& out_dir, const Clients& clients)
{
    if (k_values.size() < 2)
        throw InvalidArgument("top-k sweep needs at least two k values");
    if (std::set<std::size_t>(k_values.begin(), k_values.end()).size() != k_values.size())
        throw InvalidArgument("top-k sweep values must be distinct");
    if (std::ranges::find(k_values, std::size_t{0}) != k_values.end())
        throw InvalidArgument("top-k values must be at least 1");

    require_file(cfg.kb_path, "kb_path");
    require_file(cfg.dataset_path, "dataset_path");
    const auto kb = load_index(cfg.kb_path);
    const auto posts = load_dataset(cfg.dataset_path);

    std::map<std::size_t, EvalReport> reports;
    for (auto k : k_values) {
        auto run_cfg = cfg;
        for (auto& [level, v] : run_cfg.top_k)
            v = k;
        reports[k] = run_pipeline(run_cfg, (fs::path(out_dir) / ("top_" + std::to_string(k))).string(), clients,
                                  kb, posts)
                         .report;
    }

    SweepTable table;
    for (auto level : cfg.levels)
        for (auto k : k_values) {
            const auto& levels = reports.at(k).levels;
            auto it = std::ranges::find_if(levels, [&](const LevelSummary& s) { return s.level == level; });
            SweepRow row{level, k, {}};
            if (it != levels.end())
                row.summary = *it;
            else
                row.summary.level = level;
            table.rows.push_back(std::move(row));
        }
    write_file((fs::path(out_dir) / "sweep.csv").string(), table.csv());
    write_file((fs::path(out_dir) / "sweep.md").string(), table.markdown());
    return table;
}

nlohmann::json reward_spec(const PipelineConfig& cfg, Level level)
{
    const auto band = band_range(level);
    const auto& c = cfg.clients;
    std::string endpoint;
    if (c.mode == ClientMode::http)
        if (const char* base = std::getenv("LF_API_BASE"))
            endpoint = base;
    const char* mode = c.mode == ClientMode::http ? "http" : c.mode == ClientMode::mock ? "mock" : "simulated";
    return {{"alpha", cfg.reward.alpha},
            {"sigmoid_scale", cfg.reward.sigmoid_scale},
            {"level", to_string(level)},
            {"band", {{"L", band.lo}, {"R", band.hi}}},
            {"preference_judge", {{"mode", mode}, {"model", c.judge_model}, {"endpoint", endpoint}}}};
}

std::string reward_spec_hash(const nlohmann::json& spec) { return sha256_hex(spec.dump()); }

std::size_t export_training(const PipelineConfig& cfg, const std::string& out_path, const Clients& clients)
{
    cfg.validate();
    require_file(cfg.kb_path, "kb_path");
    require_file(cfg.dataset_path, "dataset_path");
    const auto kb = load_index(cfg.kb_path);
    const auto posts = load_dataset(cfg.dataset_path);
    const auto parts = split_dataset(posts, cfg.seed, cfg.train_fraction);
    std::set<std::string> train_ids;
    for (const auto& p : parts.train)
        train_ids.insert(p.post_id);

    const auto hash = config_hash(cfg);
    std::map<Level, json> specs;
    json spec_hashes;
    for (auto level : cfg.levels) {
        specs[level] = reward_spec(cfg, level);
        spec_hashes[to_string(level)] = reward_spec_hash(specs[level]);
    }

    const ItemRunner runner(cfg, clients, kb);
    const std::size_t n_levels = cfg.levels.size();
    const std::size_t n = posts.size() * n_levels;
    auto prepared = bounded_map<Prepared>(n, cfg.max_inflight, [&](std::size_t i) {
        return runner.prepare(posts[i / n_levels], cfg.levels[i % n_levels]);
    });

    std::string body;
    std::size_t n_train = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& post = posts[i / n_levels];
        const auto level = cfg.levels[i % n_levels];
        if (!prepared[i].ok()) {
            try {
                std::rethrow_exception(prepared[i].error);
            } catch (const std::exception& e) {
                throw Error("export " + post.post_id + "/" + to_string(level) + ": " + e.what());
            }
        }
        const bool train = train_ids.contains(post.post_id);
        n_train += train;
        const json task{{"task_id", post.post_id + ":" + to_string(level)},
                        {"post_id", post.post_id},
                        {"prompt", prepared[i].value->prompt},
                        {"level", to_string(level)},
                        {"evidence_chunk_ids", prepared[i].value->evidence.chunk_ids()},
                        {"reward_spec", specs.at(level)},
                        {"reward_spec_hash", spec_hashes[to_string(level)]},
                        {"split", train ? "train" : "eval"},
                        {"config_hash", hash}};
        body += task.dump() + "\n";
    }
    if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
        fs::create_directories(parent);
    write_file(out_path, body);

    const json manifest{{"config_hash", hash},
                        {"seed", cfg.seed},
                        {"train_fraction", cfg.train_fraction},
                        {"reward_spec_hashes", spec_hashes},
                        {"counts", {{"tasks", n}, {"train", n_train}, {"eval", n - n_train}}},
                        {"tasks_sha256", sha256_hex(body)},
                        {"preference_judge_model", cfg.clients.judge_model},
                        {"exported_at", utc_now()}};
    write_file(fs::path(out_path).replace_extension(".manifest.json").string(), manifest.dump(2) + "\n");
    return n;
}

std::vector<TabularResponse> load_tabular_fixture(const std::string& path)
{
    require_file(path, "tabular fixture");
    std::vector<TabularResponse> out;
    for_each_jsonl(path, [&](const json& j, std::size_t) {
        TabularResponse r;
        r.response_id = required_string(j, "response_id");
        if (!j.contains("fkre") || !j.at("fkre").is_number())
            throw InvalidArgument("missing numeric field 'fkre'");
        r.fkre = j.at("fkre").get<double>();
        r.rating = j.value("rating", 3);
        if (r.rating < 1 || r.rating > 5)
            throw InvalidArgument("rating must be in 1..5");
        out.push_back(std::move(r));
    });
    if (out.empty())
        throw Error("no records");
    return out;
}

std::vector<double> tabular_rewards(const std::vector<TabularResponse>& responses, const RewardConfig& reward)
{
    std::vector<double> out;
    out.reserve(responses.size());
    for (const auto& r : responses)
        out.push_back(score_response(FkreScore::from_raw(r.fkre), std::span<const int>(&r.rating, 1), reward).total);
    return out;
}

} // namespace litctl

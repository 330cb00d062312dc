#include "litctl/pipeline.hpp"
#include "litctl/util.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace litctl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitRunFailed = 3;

// Config-backed commands share --config and --seed.
struct ConfigArgs {
    std::string path;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app, bool required)
    {
        auto* opt = app->add_option("--config", path, "pipeline.toml");
        if (required)
            opt->required();
        else
            opt->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "override the configured seed");
    }

    PipelineConfig load() const
    {
        PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
        if (seed)
            cfg.seed = *seed;
        return cfg;
    }
};

std::size_t ingest(const std::string& input, const std::string& out, const ChunkConfig& chunk,
                   const std::optional<std::string>& ingested_at)
{
    KnowledgeBase kb;
    auto add = [&](const std::string& text, DocumentMetadata meta) {
        if (!meta.ingested_at)
            meta.ingested_at = ingested_at;
        kb.add_document(text, meta, chunk);
    };
    if (fs::is_directory(input)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(input))
            if (e.is_regular_file() && e.path().extension() == ".txt")
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            add(read_file(f.string()), {f.stem().string(), f.stem().string(), "", std::nullopt});
    } else {
        std::istringstream in(read_file(input));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_copy(line).empty())
                continue;
            try {
                const auto j = json::parse(line);
                DocumentMetadata meta;
                if (j.contains("doc_id"))
                    meta.doc_id = j.at("doc_id").get<std::string>();
                meta.title = j.value("title", "");
                meta.source = j.value("source", "");
                if (j.contains("ingested_at"))
                    meta.ingested_at = j.at("ingested_at").get<std::string>();
                add(j.at("text").get<std::string>(), meta);
            } catch (const json::exception& e) {
                throw ParseError(input + ": " + e.what(), lineno);
            }
        }
    }
    if (kb.empty())
        throw Error("no documents found in " + input);
    save_index(kb, out);
    return kb.chunks().size();
}

json evidence_json(const MisinfoPost& post, const EvidenceSet& ev, std::size_t k)
{
    json chunks = json::array();
    for (const auto& it : ev.items)
        chunks.push_back({{"chunk_id", it.chunk.chunk_id},
                          {"score", it.score},
                          {"rating", it.rating},
                          {"band", to_string(it.chunk.band)},
                          {"fkre_clamped", it.chunk.fkre.clamped}});
    return {{"post_id", post.post_id}, {"level", to_string(ev.level)}, {"top_k", k},
            {"chunks", chunks},        {"context", ev.context}};
}

std::map<Level, std::vector<EvalItem>> by_level(const std::vector<EvalItem>& items)
{
    std::map<Level, std::vector<EvalItem>> out;
    for (const auto& it : items)
        if (!it.counterspeech.text.empty())
            out[it.counterspeech.level].push_back(it);
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"litctl: literacy-controlled counterspeech pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "chunk documents into a kb.jsonl index");
    std::string ingest_in, ingest_out;
    ChunkConfig chunk;
    std::optional<std::string> ingested_at;
    ingest_cmd->add_option("--input", ingest_in, "directory of .txt files or a documents JSONL")
        ->required()
        ->check(CLI::ExistingPath);
    ingest_cmd->add_option("--out", ingest_out, "kb.jsonl to write")->required();
    ingest_cmd->add_option("--chunk-size", chunk.chunk_size, "words per chunk")->capture_default_str();
    ingest_cmd->add_option("--overlap", chunk.overlap, "words shared by neighbouring chunks")->capture_default_str();
    ingest_cmd->add_option("--min-tail", chunk.min_tail, "shortest final window kept on its own")
        ->capture_default_str();
    ingest_cmd->add_option("--ingested-at", ingested_at, "timestamp for documents without one");

    // retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "hybrid retrieval plus evidence filtering");
    ConfigArgs retrieve_cfg;
    retrieve_cfg.attach(retrieve_cmd, false);
    std::string kb_path, query_file, retrieve_out, merge = "union", level_name;
    std::optional<std::size_t> top_k;
    retrieve_cmd->add_option("--kb", kb_path, "kb.jsonl")->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--query-file", query_file, "misinformation JSONL")->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--level", level_name, "low | medium | high")->required();
    retrieve_cmd->add_option("--top-k", top_k, "defaults to the level's configured value");
    retrieve_cmd->add_option("--merge", merge, "union | intersection")->capture_default_str();
    retrieve_cmd->add_option("--out", retrieve_out, "evidence.jsonl")->required();

    // generate
    auto* generate_cmd = app.add_subcommand("generate", "full run: retrieve, generate, evaluate");
    ConfigArgs generate_cfg;
    generate_cfg.attach(generate_cmd, true);
    std::string run_out;
    bool optimize = false;
    generate_cmd->add_option("--out", run_out, "run directory")->required();
    generate_cmd->add_flag("--optimize", optimize, "best-of-n over a sampled group");

    // train-tabular
    auto* train_cmd = app.add_subcommand("train-tabular", "GRPO on a finite response set");
    std::string fixture, trace_out, train_level = "low";
    GrpoConfig grpo;
    RewardConfig reward;
    train_cmd->add_option("--fixture", fixture, "JSONL {response_id, fkre, rating}")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--level", train_level, "target level")->capture_default_str();
    train_cmd->add_option("--beta", grpo.beta)->capture_default_str();
    train_cmd->add_option("--lr", grpo.learning_rate)->capture_default_str();
    train_cmd->add_option("--iterations", grpo.iterations)->capture_default_str();
    train_cmd->add_option("--group-size", grpo.n_completions)->capture_default_str();
    train_cmd->add_option("--seed", grpo.seed)->capture_default_str();
    train_cmd->add_option("--alpha", reward.alpha)->capture_default_str();
    train_cmd->add_option("--out", trace_out, "trace CSV");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a counterspeech.jsonl");
    ConfigArgs eval_cfg;
    eval_cfg.attach(eval_cmd, false);
    std::string eval_in, eval_md, eval_csv;
    eval_cmd->add_option("--in", eval_in, "counterspeech.jsonl")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", eval_md, "Markdown report")->required();
    eval_cmd->add_option("--csv", eval_csv, "CSV report");

    // cross-eval
    auto* cross_cmd = app.add_subcommand("cross-eval", "3x3 preference matrix across levels");
    ConfigArgs cross_cfg;
    cross_cfg.attach(cross_cmd, false);
    std::string cross_in, cross_csv, cross_md;
    cross_cmd->add_option("--in", cross_in, "counterspeech.jsonl with every level")
        ->required()
        ->check(CLI::ExistingFile);
    cross_cmd->add_option("--csv", cross_csv, "matrix CSV");
    cross_cmd->add_option("--report", cross_md, "matrix Markdown");

    // sweep-topk
    auto* sweep_cmd = app.add_subcommand("sweep-topk", "one run per top-k value");
    ConfigArgs sweep_cfg;
    sweep_cfg.attach(sweep_cmd, true);
    std::vector<std::size_t> ks{10, 5, 3};
    std::string sweep_out;
    sweep_cmd->add_option("--k", ks, "k values")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

    // export-training
    auto* export_cmd = app.add_subcommand("export-training", "training tasks for an external trainer");
    ConfigArgs export_cfg;
    export_cfg.attach(export_cmd, true);
    std::string export_out;
    export_cmd->add_option("--out", export_out, "training_tasks.jsonl")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            const auto n = ingest(ingest_in, ingest_out, chunk, ingested_at);
            std::cout << "wrote " << n << " chunks to " << ingest_out << "\n";
        } else if (*retrieve_cmd) {
            auto cfg = retrieve_cfg.load();
            const auto level = parse_level(level_name);
            const auto k = top_k.value_or(cfg.top_k.at(level));
            const auto kb = load_index(kb_path);
            const auto posts = load_dataset(query_file);
            const auto clients = make_clients(cfg.clients);
            const HybridRetriever retriever(kb, *clients.embedder, cfg.pool_size);
            const JudgeEvidenceRater rater(*clients.judge, clients.retry);
            std::string body;
            for (const auto& post : posts) {
                RetrievalQuery q{post.text, level, k, parse_merge_mode(merge)};
                auto ev = retriever.retrieve(q, rater, {cfg.pref_threshold, cfg.max_inflight});
                body += evidence_json(post, ev, k).dump() + "\n";
            }
            write_file(retrieve_out, body);
            std::cout << "wrote evidence for " << posts.size() << " posts to " << retrieve_out << "\n";
        } else if (*generate_cmd) {
            auto cfg = generate_cfg.load();
            cfg.optimize = cfg.optimize || optimize;
            const auto clients = make_clients(cfg.clients);
            try {
                auto res = run_pipeline(cfg, run_out, clients);
                std::cout << "config " << res.config_hash << ": " << res.items.size() << " items, " << res.failed
                          << " failed; outputs in " << run_out << "\n";
            } catch (const PipelineFailed& e) {
                std::cerr << "litctl: " << e.what() << "\n";
                return kExitRunFailed;
            }
        } else if (*train_cmd) {
            reward.level = parse_level(train_level);
            const auto responses = load_tabular_fixture(fixture);
            const auto rewards = tabular_rewards(responses, reward);
            const auto ref = TabularPolicy::uniform(responses.size());
            const auto res = train_tabular(ref, ref, [&](std::size_t j) { return rewards[j]; }, grpo);
            if (!trace_out.empty())
                write_file(trace_out, trace_csv(res.trace));
            const auto probs = res.policy.probabilities();
            const auto band = band_for(reward.level);
            double in_band = 0.0;
            std::cout << "response_id,fkre,reward,probability\n";
            for (std::size_t i = 0; i < responses.size(); ++i) {
                if (classify_band(FkreScore::from_raw(responses[i].fkre)) == band)
                    in_band += probs[i];
                std::cout << responses[i].response_id << "," << format_fixed(responses[i].fkre, 2) << ","
                          << format_fixed(rewards[i], 6) << "," << format_fixed(probs[i], 6) << "\n";
            }
            std::cout << "in-band mass " << format_fixed(in_band, 6) << ", KL to reference "
                      << format_fixed(kl_divergence(res.policy, ref), 6) << "\n";
        } else if (*eval_cmd) {
            auto cfg = eval_cfg.load();
            const auto clients = make_clients(cfg.clients);
            const auto hash = eval_cfg.path.empty() ? std::string{} : config_hash(cfg);
            const auto report = evaluate_corpus(load_counterspeech(eval_in), clients.eval_clients(cfg.max_inflight));
            write_file(eval_md, report_markdown(report, "Evaluation report", hash));
            if (!eval_csv.empty())
                write_file(eval_csv, report_csv(report, hash));
            std::cout << report_csv(report, hash);
        } else if (*cross_cmd) {
            auto cfg = cross_cfg.load();
            const auto clients = make_clients(cfg.clients);
            const auto m = cross_eval(by_level(load_counterspeech(cross_in)), *clients.judge, clients.retry,
                                      cfg.max_inflight);
            if (!cross_csv.empty())
                write_file(cross_csv, m.csv());
            if (!cross_md.empty())
                write_file(cross_md, m.markdown());
            std::cout << m.markdown() << "strictly diagonally dominant: "
                      << (m.strictly_diagonally_dominant() ? "yes" : "no") << "\n";
        } else if (*sweep_cmd) {
            const auto cfg = sweep_cfg.load();
            const auto clients = make_clients(cfg.clients);
            try {
                std::cout << topk_sweep(cfg, ks, sweep_out, clients).markdown();
            } catch (const PipelineFailed& e) {
                std::cerr << "litctl: " << e.what() << "\n";
                return kExitRunFailed;
            }
        } else if (*export_cmd) {
            const auto cfg = export_cfg.load();
            const auto clients = make_clients(cfg.clients);
            const auto n = export_training(cfg, export_out, clients);
            std::cout << "wrote " << n << " tasks to " << export_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "litctl: " << e.what() << "\n";
        return kExitError;
    }
    return 0;
}

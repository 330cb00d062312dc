#include "doctest.h"

#include "litctl/pipeline.hpp"
#include "litctl/util.hpp"

#include <filesystem>
#include <mutex>
#include <set>

using namespace litctl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kConfig = std::string(LITCTL_ROOT) + "/configs/pipeline.toml";

fs::path scratch(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("litctl_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<json> read_jsonl(const fs::path& p)
{
    std::vector<json> out;
    std::istringstream in(read_file(p.string()));
    for (std::string line; std::getline(in, line);)
        if (!line.empty())
            out.push_back(json::parse(line));
    return out;
}

PipelineConfig fast_config()
{
    auto cfg = load_config(kConfig);
    cfg.clients.retry_base_delay_ms = 0;
    return cfg;
}

// Fails every generation aimed at the hard band.
struct HardBandDown : ChatClient {
    SimulatedChatClient inner;
    std::string complete(const ChatRequest& req) const override
    {
        if (req.messages.back().content.starts_with("<|Target Fkre|>0-59"))
            throw ApiError("model unavailable");
        return inner.complete(req);
    }
    std::string model_id() const override { return "flaky"; }
};

// Wraps the simulated client and keeps every exchange as a mock fixture line.
struct Recorder : ChatClient {
    SimulatedChatClient inner;
    mutable std::mutex mu;
    mutable std::map<std::pair<std::string, std::optional<std::uint64_t>>, std::string> seen;
    std::string complete(const ChatRequest& req) const override
    {
        auto reply = inner.complete(req);
        std::lock_guard lock(mu);
        seen[{prompt_hash(req), req.seed}] = reply;
        return reply;
    }
    std::string model_id() const override { return "recorder"; }

    std::string jsonl() const
    {
        std::string out;
        for (const auto& [key, reply] : seen) {
            json j{{"prompt_sha256", key.first}, {"response", reply}};
            if (key.second)
                j["seed"] = *key.second;
            out += j.dump() + "\n";
        }
        return out;
    }
};

std::string without_hash_column(const std::string& csv)
{
    std::string out;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

} // namespace

TEST_CASE("config loads with defaults and resolves paths against the file")
{
    const auto cfg = load_config(kConfig);
    CHECK(cfg.reward.alpha == 0.5);
    CHECK(cfg.reward.sigmoid_scale == 5.0);
    CHECK(cfg.grpo.n_completions == 4);
    CHECK(cfg.grpo.beta == 0.2);
    CHECK(cfg.top_k.at(Level::low) == 10);
    CHECK(cfg.top_k.at(Level::medium) == 3);
    CHECK(cfg.top_k.at(Level::high) == 10);
    CHECK(cfg.merge_mode == MergeMode::union_);
    CHECK(cfg.failure_threshold == 0.10);
    CHECK(fs::path(cfg.kb_path).is_absolute());
    CHECK(fs::exists(cfg.kb_path));
    CHECK(fs::exists(cfg.dataset_path));

    CHECK(config_hash(cfg) == config_hash(load_config(kConfig)));
    CHECK(config_hash(cfg) == sha256_hex(to_json(cfg).dump()));
    auto changed = cfg;
    changed.reward.alpha = 0.6;
    CHECK(config_hash(changed) != config_hash(cfg));
    changed = cfg;
    changed.seed = 8;
    CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("config errors")
{
    const auto dir = scratch("config");
    const auto path = (dir / "bad.toml").string();
    write_file(path, "seed = 7\n[reward\nalpha = 0.5\n");
    try {
        load_config(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    write_file(path, "[clients]\nmode = \"grpc\"\n");
    CHECK_THROWS_AS(load_config(path), InvalidArgument);
    write_file(path, "[reward]\nalpha = \"half\"\n");
    CHECK_THROWS_AS(load_config(path), InvalidArgument);
    write_file(path, "[retrieval.top_k]\nmedium = 0\n");
    CHECK_THROWS_AS(load_config(path), InvalidArgument);

    ClientConfig mock;
    mock.mode = ClientMode::mock;
    CHECK_THROWS_AS(make_clients(mock), InvalidArgument);
}

TEST_CASE("load_dataset validates and preserves order")
{
    const auto dir = scratch("dataset");
    const auto path = (dir / "posts.jsonl").string();
    write_file(path, "{\"post_id\": \"b\", \"text\": \"Second.\", \"source_dataset\": \"check_covid\"}\n"
                     "{\"post_id\": \"a\", \"text\": \"First.\"}\n");
    auto posts = load_dataset(path);
    REQUIRE(posts.size() == 2);
    CHECK(posts[0].post_id == "b");
    CHECK(posts[0].source_dataset == SourceDataset::check_covid);

    write_file(path, "{\"post_id\": \"a\", \"text\": \"ok\"}\n{\"post_id\": \"b\"}\n");
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    write_file(path, "{\"post_id\": \"a\", \"text\": \"  \"}\n");
    CHECK_THROWS_AS(load_dataset(path), ParseError);
    write_file(path, "\n");
    CHECK_THROWS_WITH(load_dataset(path), "no records");
}

TEST_CASE("split is seeded, order independent and disjoint")
{
    std::vector<MisinfoPost> posts;
    for (int i = 0; i < 10; ++i)
        posts.push_back({"p" + std::to_string(i), "text " + std::to_string(i), "", {}});
    const auto a = split_dataset(posts, 7);
    CHECK(a.train.size() == 8);
    CHECK(a.eval.size() == 2);
    auto reversed = posts;
    std::reverse(reversed.begin(), reversed.end());
    const auto b = split_dataset(reversed, 7);
    std::set<std::string> ta, tb;
    for (const auto& p : a.train)
        ta.insert(p.post_id);
    for (const auto& p : b.train)
        tb.insert(p.post_id);
    CHECK(ta == tb);
    for (const auto& p : a.eval)
        CHECK_FALSE(ta.contains(p.post_id));

    std::set<std::string> other;
    for (std::uint64_t seed = 1; seed < 6; ++seed)
        for (const auto& p : split_dataset(posts, seed).eval)
            other.insert(p.post_id);
    CHECK(other.size() > 2); // membership moves with the seed
}

TEST_CASE("hermetic run: nine records and byte-identical outputs")
{
    const auto cfg = fast_config();
    const auto clients = make_clients(cfg.clients);
    const auto dir = scratch("run");
    const auto r1 = run_pipeline(cfg, (dir / "a").string(), clients);
    const auto r2 = run_pipeline(cfg, (dir / "b").string(), make_clients(cfg.clients));
    CHECK(r1.items.size() == 9);
    CHECK(r1.failed == 0);
    for (auto name : {"report.csv", "evidence.jsonl", "counterspeech.jsonl", "report.md"})
        CHECK(read_file((dir / "a" / name).string()) == read_file((dir / "b" / name).string()));

    const auto hash = config_hash(cfg);
    const auto rows = read_jsonl(dir / "a" / "counterspeech.jsonl");
    REQUIRE(rows.size() == 9);
    for (const auto& row : rows) {
        CHECK(row["config_hash"] == hash);
        CHECK_FALSE(row["text"].get<std::string>().empty());
        CHECK(row["provenance"]["prompt_sha256"].get<std::string>().size() == 64);
    }
    for (const auto& row : read_jsonl(dir / "a" / "evidence.jsonl")) {
        CHECK(row["config_hash"] == hash);
        const auto level = parse_level(row["level"].get<std::string>());
        CHECK(row["chunks"].size() <= cfg.top_k.at(level));
        for (const auto& c : row["chunks"]) {
            CHECK(parse_band(c["band"].get<std::string>()) == band_for(level));
            CHECK(c["rating"].get<int>() >= 3);
        }
    }
    const auto csv = read_file((dir / "a" / "report.csv").string());
    std::istringstream lines(csv);
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line); ++n)
        if (n > 0)
            CHECK(line.ends_with("," + hash));
    CHECK(n == 5);

    const auto manifest = json::parse(read_file((dir / "a" / "manifest.json").string()));
    CHECK(manifest["config_hash"] == hash);
    CHECK(manifest["item_seeds"].size() == 9);
    CHECK(manifest["models"]["generator"] == clients.generator->model_id());
    CHECK(manifest["outputs"]["report.csv"] == sha256_hex(csv));
    CHECK(manifest["record_hashes"].size() == 9);

    auto reseeded = cfg;
    reseeded.seed = 99;
    const auto r3 = run_pipeline(reseeded, (dir / "c").string(), clients);
    CHECK(r3.config_hash != r1.config_hash);
}

TEST_CASE("mock mode replays recorded exchanges")
{
    auto cfg = fast_config();
    auto recording = make_clients(cfg.clients);
    auto gen = std::make_unique<Recorder>();
    auto judge = std::make_unique<Recorder>();
    auto* gen_log = gen.get();
    auto* judge_log = judge.get();
    recording.generator = std::move(gen);
    recording.factual = std::move(judge);
    recording.judge = std::make_unique<Recorder>();
    auto* pref_log = static_cast<Recorder*>(recording.judge.get());
    const auto dir = scratch("mock");
    const auto live = run_pipeline(cfg, (dir / "live").string(), recording);

    const auto fixture = dir / "mock_responses.jsonl";
    write_file(fixture.string(), gen_log->jsonl() + judge_log->jsonl() + pref_log->jsonl());
    cfg.clients.mode = ClientMode::mock;
    cfg.clients.mock_responses = fixture.string();
    const auto replay = run_pipeline(cfg, (dir / "replay").string(), make_clients(cfg.clients));
    CHECK(replay.failed == 0);
    CHECK(without_hash_column(read_file((dir / "replay" / "report.csv").string())) ==
          without_hash_column(read_file((dir / "live" / "report.csv").string())));

    write_file(fixture.string(), gen_log->jsonl());
    CHECK_THROWS_AS(run_pipeline(cfg, (dir / "partial").string(), make_clients(cfg.clients)), PipelineFailed);
}

TEST_CASE("written counterspeech re-evaluates to the same report")
{
    const auto cfg = fast_config();
    const auto clients = make_clients(cfg.clients);
    const auto dir = scratch("reeval");
    const auto run = run_pipeline(cfg, dir.string(), clients);
    const auto items = load_counterspeech((dir / "counterspeech.jsonl").string());
    REQUIRE(items.size() == 9);
    const auto again = evaluate_corpus(items, clients.eval_clients(2));
    CHECK(report_csv(again, run.config_hash) == read_file((dir / "report.csv").string()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(items[i].counterspeech.text == run.items[i].counterspeech->text);
        CHECK(items[i].counterspeech.provenance.evidence_chunk_ids ==
              run.items[i].counterspeech->provenance.evidence_chunk_ids);
    }
}

TEST_CASE("optimize mode records four candidates and the argmax")
{
    auto cfg = fast_config();
    cfg.optimize = true;
    const auto clients = make_clients(cfg.clients);
    const auto dir = scratch("optimize");
    const auto run = run_pipeline(cfg, dir.string(), clients);
    const auto rows = read_jsonl(dir / "counterspeech.jsonl");
    REQUIRE(rows.size() == 9);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& item = run.items[i];
        const auto& pv = rows[i]["provenance"];
        REQUIRE(pv["candidate_sha256"].size() == 4);
        REQUIRE(item.candidate_rewards.size() == 4);
        const auto sel = pv["selected_index"].get<std::size_t>();
        std::size_t best = 0;
        for (std::size_t j = 1; j < 4; ++j)
            if (item.candidate_rewards[j] > item.candidate_rewards[best])
                best = j;
        CHECK(sel == best);
        CHECK(pv["candidate_sha256"][sel] == sha256_hex(rows[i]["text"].get<std::string>()));
        CHECK(rows[i]["reward"]["total"].get<double>() == doctest::Approx(item.candidate_rewards[sel]));
    }
}

TEST_CASE("item failures are isolated and counted against the threshold")
{
    auto cfg = fast_config();
    auto clients = make_clients(cfg.clients);
    clients.generator = std::make_unique<HardBandDown>();
    const auto dir = scratch("failures");
    CHECK_THROWS_AS(run_pipeline(cfg, dir.string(), clients), PipelineFailed);
    const auto rows = read_jsonl(dir / "counterspeech.jsonl");
    REQUIRE(rows.size() == 9);
    std::size_t failed = 0;
    for (const auto& row : rows) {
        const bool hard = row["level"] == "high";
        CHECK(row["error"].get<std::string>().empty() != hard);
        failed += hard;
    }
    CHECK(failed == 3);
    CHECK(read_file((dir / "report.md").string()).find("generation: model unavailable") != std::string::npos);

    cfg.failure_threshold = 0.5;
    const auto run = run_pipeline(cfg, dir.string(), clients);
    CHECK(run.failed == 3);
    REQUIRE(run.report.levels.size() == 3);
    CHECK(run.report.levels[2].failed == 3);
    CHECK(run.report.levels[0].preference);
}

TEST_CASE("top-k sweep table shape")
{
    const auto cfg = fast_config();
    const auto clients = make_clients(cfg.clients);
    const auto dir = scratch("sweep");
    const auto table = topk_sweep(cfg, {10, 5, 3}, dir.string(), clients);
    REQUIRE(table.rows.size() == 9);
    CHECK(table.rows[0].level == Level::low);
    CHECK(table.rows[0].k == 10);
    CHECK(table.rows[2].k == 3);
    CHECK(table.rows[3].level == Level::medium);
    for (const auto& r : table.rows) {
        CHECK(r.summary.politeness);
        CHECK(r.summary.target_distance);
        CHECK(r.summary.preference);
        CHECK(r.summary.factual_accuracy);
    }
    CHECK(fs::exists(dir / "top_5" / "report.csv"));
    CHECK(read_file((dir / "sweep.csv").string()) == table.csv());
    CHECK(table.markdown().find("| high | top_3 |") != std::string::npos);
    CHECK_THROWS_AS(topk_sweep(cfg, {10}, dir.string(), clients), InvalidArgument);
    CHECK_THROWS_AS(topk_sweep(cfg, {5, 5}, dir.string(), clients), InvalidArgument);
}

TEST_CASE("export-training writes tasks with verifiable reward specs")
{
    const auto cfg = fast_config();
    const auto clients = make_clients(cfg.clients);
    const auto dir = scratch("export");
    const auto out = dir / "training_tasks.jsonl";
    CHECK(export_training(cfg, out.string(), clients) == 9);
    const auto tasks = read_jsonl(out);
    const auto manifest = json::parse(read_file((dir / "training_tasks.manifest.json").string()));
    REQUIRE(tasks.size() == 9);
    std::map<std::string, std::string> split_of;
    for (const auto& t : tasks) {
        const auto level = t["level"].get<std::string>();
        // Rebuilt by hand from the configured reward, not from reward_spec().
        const auto range = band_range(parse_level(level));
        const json expected{{"alpha", cfg.reward.alpha},
                            {"sigmoid_scale", cfg.reward.sigmoid_scale},
                            {"level", level},
                            {"band", {{"L", range.lo}, {"R", range.hi}}},
                            {"preference_judge",
                             {{"mode", "simulated"}, {"model", cfg.clients.judge_model}, {"endpoint", ""}}}};
        CHECK(t["reward_spec"] == expected);
        CHECK(t["reward_spec_hash"] == sha256_hex(expected.dump()));
        CHECK(t["reward_spec_hash"] == manifest["reward_spec_hashes"][level]);
        CHECK(t["prompt"].get<std::string>().find("Health misinformation to address:") != std::string::npos);
        const auto post = t["post_id"].get<std::string>();
        const auto split = t["split"].get<std::string>();
        CHECK((split == "train" || split == "eval"));
        if (split_of.contains(post))
            CHECK(split_of[post] == split);
        split_of[post] = split;
    }
    CHECK(manifest["counts"]["train"].get<std::size_t>() + manifest["counts"]["eval"].get<std::size_t>() == 9);

    auto tampered = tasks[0]["reward_spec"];
    tampered["alpha"] = 0.51;
    CHECK(reward_spec_hash(tampered) != tasks[0]["reward_spec_hash"]);
}

TEST_CASE("tabular fixture")
{
    const auto responses = load_tabular_fixture(std::string(LITCTL_ROOT) + "/data/tabular_responses.jsonl");
    REQUIRE(responses.size() == 11);
    RewardConfig rc;
    rc.level = Level::low;
    const auto rewards = tabular_rewards(responses, rc);
    const auto best = argmax_first(rewards);
    CHECK(responses[best].fkre >= 80.0);
    CHECK(responses[best].fkre <= 100.0);

    const auto dir = scratch("tabular");
    const auto path = (dir / "t.jsonl").string();
    write_file(path, "{\"response_id\": \"a\", \"fkre\": 10}\n{\"response_id\": \"b\", \"fkre\": 20, \"rating\": 9}\n");
    try {
        load_tabular_fixture(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

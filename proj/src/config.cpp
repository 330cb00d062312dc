#include "litctl/pipeline.hpp"

#include "litctl/util.hpp"

#include "toml.hpp"

#include <filesystem>

namespace litctl {

namespace {

namespace fs = std::filesystem;

std::string to_string(ClientMode m)
{
    switch (m) {
    case ClientMode::simulated: return "simulated";
    case ClientMode::mock: return "mock";
    case ClientMode::http: return "http";
    }
    throw InvalidArgument("unknown client mode");
}

ClientMode parse_client_mode(std::string_view s)
{
    if (s == "simulated")
        return ClientMode::simulated;
    if (s == "mock")
        return ClientMode::mock;
    if (s == "http")
        return ClientMode::http;
    throw InvalidArgument("unknown clients.mode '" + std::string(s) + "' (expected simulated, mock or http)");
}

std::string resolve(const fs::path& base, const std::string& p)
{
    if (p.empty())
        return p;
    fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

template <typename T>
T get_or(const toml::node_view<const toml::node>& node, T fallback, const std::string& key)
{
    if (!node)
        return fallback;
    if (auto v = node.value<T>())
        return *v;
    throw InvalidArgument("config key '" + key + "' has the wrong type");
}

std::string file_digest(const std::string& path)
{
    if (path.empty() || !fs::exists(path))
        return "";
    return sha256_hex(read_file(path));
}

} // namespace

void PipelineConfig::validate() const
{
    if (levels.empty())
        throw InvalidArgument("levels must not be empty");
    for (auto l : levels)
        if (!top_k.contains(l) || top_k.at(l) == 0)
            throw InvalidArgument("top_k for level " + to_string(l) + " must be at least 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("train_fraction must be in (0, 1)");
    if (split != "all" && split != "train" && split != "eval")
        throw InvalidArgument("split must be all, train or eval");
    if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0))
        throw InvalidArgument("failure_threshold must be in [0, 1]");
    if (pref_threshold < 1 || pref_threshold > 5)
        throw InvalidArgument("pref_threshold must be in 1..5");
    reward.validate();
    grpo.validate();
    generation.validate();
}

PipelineConfig load_config(const std::string& path)
{
    toml::table tbl;
    try {
        tbl = toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        throw ParseError(path + ": " + std::string(e.description()),
                         static_cast<std::size_t>(e.source().begin.line));
    }
    const fs::path base = fs::absolute(path).parent_path();
    const toml::node_view<const toml::node> root(tbl);
    PipelineConfig cfg;

    cfg.kb_path = resolve(base, get_or<std::string>(root["kb_path"], "", "kb_path"));
    cfg.dataset_path = resolve(base, get_or<std::string>(root["dataset_path"], "", "dataset_path"));
    cfg.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(root["seed"], 7, "seed"));
    cfg.split = get_or<std::string>(root["split"], cfg.split, "split");
    cfg.train_fraction = get_or<double>(root["train_fraction"], cfg.train_fraction, "train_fraction");
    cfg.failure_threshold = get_or<double>(root["failure_threshold"], cfg.failure_threshold, "failure_threshold");
    cfg.max_inflight = static_cast<std::size_t>(get_or<std::int64_t>(root["max_inflight"], 4, "max_inflight"));
    cfg.optimize = get_or<bool>(root["optimize"], cfg.optimize, "optimize");
    if (auto arr = root["levels"].as_array()) {
        cfg.levels.clear();
        for (const auto& v : *arr) {
            auto s = v.value<std::string>();
            if (!s)
                throw InvalidArgument("levels must be strings");
            cfg.levels.push_back(parse_level(*s));
        }
    }

    const auto r = root["retrieval"];
    cfg.merge_mode = parse_merge_mode(get_or<std::string>(r["merge_mode"], "union", "retrieval.merge_mode"));
    cfg.pool_size = static_cast<std::size_t>(get_or<std::int64_t>(r["pool_size"], 50, "retrieval.pool_size"));
    cfg.pref_threshold = static_cast<int>(get_or<std::int64_t>(r["pref_threshold"], 3, "retrieval.pref_threshold"));
    for (auto l : kAllLevels) {
        const auto key = to_string(l);
        const auto v = get_or<std::int64_t>(r["top_k"][key], static_cast<std::int64_t>(cfg.top_k[l]),
                                            "retrieval.top_k." + key);
        if (v < 1)
            throw InvalidArgument("retrieval.top_k." + key + " must be at least 1");
        cfg.top_k[l] = static_cast<std::size_t>(v);
    }

    const auto rw = root["reward"];
    cfg.reward.alpha = get_or<double>(rw["alpha"], cfg.reward.alpha, "reward.alpha");
    cfg.reward.sigmoid_scale = get_or<double>(rw["sigmoid_scale"], cfg.reward.sigmoid_scale, "reward.sigmoid_scale");

    const auto g = root["grpo"];
    cfg.grpo.n_completions = static_cast<std::size_t>(
        get_or<std::int64_t>(g["n_completions"], static_cast<std::int64_t>(cfg.grpo.n_completions),
                             "grpo.n_completions"));
    cfg.grpo.beta = get_or<double>(g["beta"], cfg.grpo.beta, "grpo.beta");
    cfg.grpo.learning_rate = get_or<double>(g["learning_rate"], cfg.grpo.learning_rate, "grpo.learning_rate");
    cfg.grpo.epochs = static_cast<std::size_t>(
        get_or<std::int64_t>(g["epochs"], static_cast<std::int64_t>(cfg.grpo.epochs), "grpo.epochs"));
    cfg.grpo.iterations = static_cast<std::size_t>(
        get_or<std::int64_t>(g["iterations"], static_cast<std::int64_t>(cfg.grpo.iterations), "grpo.iterations"));
    cfg.grpo.seed = static_cast<std::uint64_t>(
        get_or<std::int64_t>(g["seed"], static_cast<std::int64_t>(cfg.grpo.seed), "grpo.seed"));

    const auto gen = root["generation"];
    cfg.generation.max_new_tokens = static_cast<int>(
        get_or<std::int64_t>(gen["max_new_tokens"], cfg.generation.max_new_tokens, "generation.max_new_tokens"));
    cfg.generation.temperature = get_or<double>(gen["temperature"], cfg.generation.temperature,
                                                "generation.temperature");
    cfg.generation.top_p = get_or<double>(gen["top_p"], cfg.generation.top_p, "generation.top_p");

    const auto c = root["clients"];
    auto& cl = cfg.clients;
    cl.mode = parse_client_mode(get_or<std::string>(c["mode"], "simulated", "clients.mode"));
    cl.mock_responses = resolve(base, get_or<std::string>(c["mock_responses"], "", "clients.mock_responses"));
    cl.generator_model = get_or<std::string>(c["generator_model"], cl.generator_model, "clients.generator_model");
    cl.judge_model = get_or<std::string>(c["judge_model"], cl.judge_model, "clients.judge_model");
    cl.factual_model = get_or<std::string>(c["factual_model"], cl.factual_model, "clients.factual_model");
    cl.embedder = get_or<std::string>(c["embedder"], cl.embedder, "clients.embedder");
    cl.embedding_model = get_or<std::string>(c["embedding_model"], cl.embedding_model, "clients.embedding_model");
    cl.embedding_dim = static_cast<std::size_t>(
        get_or<std::int64_t>(c["embedding_dim"], static_cast<std::int64_t>(cl.embedding_dim), "clients.embedding_dim"));
    cl.embedding_seed = static_cast<std::uint64_t>(get_or<std::int64_t>(
        c["embedding_seed"], static_cast<std::int64_t>(cl.embedding_seed), "clients.embedding_seed"));
    cl.politeness = get_or<std::string>(c["politeness"], cl.politeness, "clients.politeness");
    cl.politeness_fixture = resolve(base, get_or<std::string>(c["politeness_fixture"], "", "clients.politeness_fixture"));
    cl.politeness_model = get_or<std::string>(c["politeness_model"], cl.politeness_model, "clients.politeness_model");
    cl.retry_attempts = static_cast<int>(get_or<std::int64_t>(c["retry_attempts"], 3, "clients.retry_attempts"));
    cl.retry_base_delay_ms =
        static_cast<int>(get_or<std::int64_t>(c["retry_base_delay_ms"], 500, "clients.retry_base_delay_ms"));

    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const PipelineConfig& cfg)
{
    nlohmann::json levels = nlohmann::json::array();
    for (auto l : cfg.levels)
        levels.push_back(to_string(l));
    nlohmann::json top_k;
    for (const auto& [l, k] : cfg.top_k)
        top_k[to_string(l)] = k;
    const auto& c = cfg.clients;
    // Input files enter by content digest so the hash does not depend on where the repo lives.
    return {
        {"kb_sha256", file_digest(cfg.kb_path)},
        {"dataset_sha256", file_digest(cfg.dataset_path)},
        {"levels", levels},
        {"split", cfg.split},
        {"train_fraction", cfg.train_fraction},
        {"retrieval",
         {{"merge_mode", to_string(cfg.merge_mode)},
          {"top_k", top_k},
          {"pool_size", cfg.pool_size},
          {"pref_threshold", cfg.pref_threshold}}},
        {"reward", {{"alpha", cfg.reward.alpha}, {"sigmoid_scale", cfg.reward.sigmoid_scale}}},
        {"grpo",
         {{"n_completions", cfg.grpo.n_completions},
          {"beta", cfg.grpo.beta},
          {"learning_rate", cfg.grpo.learning_rate},
          {"epochs", cfg.grpo.epochs},
          {"iterations", cfg.grpo.iterations},
          {"seed", cfg.grpo.seed}}},
        {"generation",
         {{"max_new_tokens", cfg.generation.max_new_tokens},
          {"temperature", cfg.generation.temperature},
          {"top_p", cfg.generation.top_p}}},
        {"optimize", cfg.optimize},
        {"clients",
         {{"mode", to_string(c.mode)},
          {"mock_responses_sha256", file_digest(c.mock_responses)},
          {"generator_model", c.generator_model},
          {"judge_model", c.judge_model},
          {"factual_model", c.factual_model},
          {"embedder", c.embedder},
          {"embedding_model", c.embedding_model},
          {"embedding_dim", c.embedding_dim},
          {"embedding_seed", c.embedding_seed},
          {"politeness", c.politeness},
          {"politeness_fixture_sha256", file_digest(c.politeness_fixture)},
          {"politeness_model", c.politeness_model}}},
        {"seed", cfg.seed},
        {"failure_threshold", cfg.failure_threshold},
    };
}

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

EvalClients Clients::eval_clients(std::size_t max_inflight) const
{
    return EvalClients{judge.get(), factual.get(), politeness.get(), retry, max_inflight};
}

Clients make_clients(const ClientConfig& cfg)
{
    Clients out;
    out.retry = RetryPolicy{cfg.retry_attempts, std::chrono::milliseconds(cfg.retry_base_delay_ms), 2.0};
    switch (cfg.mode) {
    case ClientMode::simulated:
        out.generator = std::make_unique<SimulatedChatClient>("simulated:" + cfg.generator_model);
        out.judge = std::make_unique<SimulatedChatClient>("simulated:" + cfg.judge_model);
        out.factual = std::make_unique<SimulatedChatClient>("simulated:" + cfg.factual_model);
        break;
    case ClientMode::mock: {
        if (cfg.mock_responses.empty())
            throw InvalidArgument("clients.mock_responses is required in mock mode");
        out.generator = std::make_unique<MockChatClient>(MockChatClient::from_file(cfg.mock_responses, cfg.generator_model));
        out.judge = std::make_unique<MockChatClient>(MockChatClient::from_file(cfg.mock_responses, cfg.judge_model));
        out.factual = std::make_unique<MockChatClient>(MockChatClient::from_file(cfg.mock_responses, cfg.factual_model));
        break;
    }
    case ClientMode::http: {
        const auto ep = endpoint_from_env();
        out.generator = std::make_unique<HttpChatClient>(ep, cfg.generator_model);
        out.judge = std::make_unique<HttpChatClient>(ep, cfg.judge_model);
        out.factual = std::make_unique<HttpChatClient>(ep, cfg.factual_model);
        break;
    }
    }

    if (cfg.embedder == "hashing")
        out.embedder = std::make_unique<HashingEmbedder>(cfg.embedding_dim, cfg.embedding_seed);
    else if (cfg.embedder == "http")
        out.embedder = std::make_unique<HttpEmbedder>(endpoint_from_env(), cfg.embedding_model, out.retry);
    else
        throw InvalidArgument("unknown clients.embedder '" + cfg.embedder + "' (expected hashing or http)");

    if (cfg.politeness == "lexicon")
        out.politeness = std::make_unique<LexiconPolitenessScorer>();
    else if (cfg.politeness == "fixture")
        out.politeness = std::make_unique<FixturePolitenessScorer>(FixturePolitenessScorer::from_file(cfg.politeness_fixture));
    else if (cfg.politeness == "http")
        out.politeness = std::make_unique<HttpPolitenessScorer>(endpoint_from_env(), cfg.politeness_model, out.retry);
    else if (cfg.politeness == "judge")
        out.politeness = std::make_unique<JudgePolitenessScorer>(*out.judge, out.retry);
    else
        throw InvalidArgument("unknown clients.politeness '" + cfg.politeness + "'");
    return out;
}

} // namespace litctl

#include "litctl/evaluation.hpp"

#include "litctl/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <sstream>

namespace litctl {

namespace {
#include "prompts.inc"

std::string_view preference_template(Level level)
{
    switch (level) {
    case Level::low: return kPreferenceLow;
    case Level::medium: return kPreferenceMedium;
    case Level::high: return kPreferenceHigh;
    }
    throw TemplateError("no preference template for level");
}

std::string describe(const std::exception_ptr& e)
{
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

std::string ask(const ChatClient& client, const std::string& prompt, const RetryPolicy& retry)
{
    auto req = user_request(prompt);
    req.temperature = 0.0;
    req.max_tokens = 200;
    return with_retries(retry, [&] { return client.complete(req); });
}

std::size_t level_index(Level l) { return static_cast<std::size_t>(l); }

} // namespace

std::optional<int> extract_rating(std::string_view reply)
{
    for (std::size_t i = 0; i < reply.size();) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j])))
            ++j;
        const auto digits = reply.substr(i, j - i);
        if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5')
            return digits[0] - '0';
        i = j;
    }
    return std::nullopt;
}

std::optional<FactualLabel> extract_factual(std::string_view reply)
{
    static const std::regex label_re(R"(label\s*:\s*\(?\s*([01])\b)", std::regex::icase);
    static const std::regex expl_re(R"(explanations?\s*:\s*)", std::regex::icase);
    const std::string text(reply);
    std::smatch m;
    if (!std::regex_search(text, m, label_re))
        return std::nullopt;
    FactualLabel out;
    out.label = m[1].str() == "1" ? 1 : 0;
    out.raw_reply = text;
    std::smatch e;
    if (std::regex_search(text, e, expl_re))
        out.explanation = trim_copy(std::string_view(text).substr(static_cast<std::size_t>(e.position(0) + e.length(0))));
    return out;
}

std::string preference_prompt(std::string_view misinformation, std::string_view counterspeech, Level user_level)
{
    return render_template(preference_template(user_level), {{"misinfo_comment", std::string(misinformation)},
                                                             {"counterspeech", std::string(counterspeech)}});
}

std::string factual_prompt(std::string_view counterspeech)
{
    return render_template(kFactual, {{"model_response", std::string(counterspeech)}});
}

std::string politeness_prompt(std::string_view text)
{
    return render_template(kPoliteness, {{"text", std::string(text)}});
}

JudgeRating judge_preference(const ChatClient& client, std::string_view counterspeech,
                             std::string_view misinformation, Level user_level, const RetryPolicy& retry)
{
    const auto prompt = preference_prompt(misinformation, counterspeech, user_level);
    std::string reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
        reply = ask(client, prompt, retry);
        if (auto r = extract_rating(reply))
            return {*r, user_level, reply, client.model_id()};
    }
    throw JudgeParseError("no rating in 1..5 in judge reply: '" + reply.substr(0, 80) + "'");
}

FactualLabel judge_factual(const ChatClient& client, std::string_view counterspeech, const RetryPolicy& retry)
{
    const auto prompt = factual_prompt(counterspeech);
    std::string reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
        reply = ask(client, prompt, retry);
        if (auto f = extract_factual(reply))
            return *f;
    }
    throw JudgeParseError("no 'Label: 0|1' line in factual judge reply: '" + reply.substr(0, 80) + "'");
}

int JudgeEvidenceRater::rate(std::string_view misinformation, std::string_view evidence, Level level) const
{
    return judge_preference(*client_, evidence, misinformation, level, retry_).rating;
}

double lexicon_politeness(std::string_view text)
{
    static constexpr std::array<std::string_view, 14> kPolite = {
        "please", "thank", "thanks", "understand", "understandable", "appreciate", "kindly",
        "sorry", "welcome", "okay", "normal", "helpful", "happy", "glad",
    };
    static constexpr std::array<std::string_view, 9> kRude = {
        "stupid", "idiot", "idiotic", "dumb", "ignorant", "ridiculous", "nonsense", "liar", "shut",
    };
    double s = 0.5;
    for (const auto& w : tokenize_words(text)) {
        const auto lw = to_lower(w);
        std::string bare;
        for (char c : lw)
            if (std::isalpha(static_cast<unsigned char>(c)))
                bare.push_back(c);
        if (std::find(kPolite.begin(), kPolite.end(), bare) != kPolite.end())
            s += 0.1;
        if (std::find(kRude.begin(), kRude.end(), bare) != kRude.end())
            s -= 0.2;
    }
    return std::clamp(s, 0.0, 1.0);
}

double LexiconPolitenessScorer::score(std::string_view text) const
{
    if (trim_copy(text).empty())
        throw InvalidArgument("politeness of empty text");
    return lexicon_politeness(text);
}

FixturePolitenessScorer FixturePolitenessScorer::from_file(const std::string& path)
{
    FixturePolitenessScorer s;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty())
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            s.add(j.at("text").get<std::string>(), j.at("score").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        }
    }
    return s;
}

void FixturePolitenessScorer::add(std::string text, double score)
{
    if (!(score >= 0.0 && score <= 1.0))
        throw InvalidArgument("politeness score must be in [0, 1]");
    scores_[std::move(text)] = score;
}

double FixturePolitenessScorer::score(std::string_view text) const
{
    if (trim_copy(text).empty())
        throw InvalidArgument("politeness of empty text");
    auto it = scores_.find(text);
    if (it == scores_.end())
        throw ApiError("no politeness fixture for text '" + std::string(text.substr(0, 40)) + "'");
    return it->second;
}

HttpPolitenessScorer::HttpPolitenessScorer(Endpoint endpoint, std::string model, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), retry_(retry)
{
}

double HttpPolitenessScorer::score(std::string_view text) const
{
    if (trim_copy(text).empty())
        throw InvalidArgument("politeness of empty text");
    nlohmann::json body{{"model", model_}, {"text", std::string(text)}};
    const auto res = with_retries(retry_, [&] { return post_json(endpoint_, "/classify", body); });
    if (!res.contains("score") || !res["score"].is_number())
        throw ApiError("politeness response has no numeric 'score'");
    const double p = res["score"].get<double>();
    if (!(p >= 0.0 && p <= 1.0))
        throw ApiError("politeness score " + std::to_string(p) + " outside [0, 1]");
    return p;
}

double JudgePolitenessScorer::score(std::string_view text) const
{
    if (trim_copy(text).empty())
        throw InvalidArgument("politeness of empty text");
    const auto prompt = politeness_prompt(text);
    for (int attempt = 0; attempt < 2; ++attempt)
        if (auto r = extract_rating(ask(*client_, prompt, retry_)))
            return (*r - 1) / 4.0;
    throw JudgeParseError("no politeness rating in judge reply");
}

std::string EvalRecord::hash() const { return sha256_hex(to_json(*this).dump()); }

nlohmann::json to_json(const EvalRecord& r)
{
    nlohmann::json j{{"post_id", r.post_id},
                     {"level", to_string(r.level)},
                     {"text", r.text},
                     {"fkre", r.fkre},
                     {"target_distance", r.target_distance},
                     {"refusal", r.refusal},
                     {"errors", r.errors},
                     {"factual_explanation", r.factual_explanation}};
    j["politeness"] = r.politeness ? nlohmann::json(*r.politeness) : nlohmann::json();
    j["rating"] = r.rating ? nlohmann::json(*r.rating) : nlohmann::json();
    j["preference"] = r.preference ? nlohmann::json(*r.preference) : nlohmann::json();
    j["factual"] = r.factual ? nlohmann::json(*r.factual) : nlohmann::json();
    return j;
}

EvalRecord evaluate_one(const EvalItem& item, const EvalClients& clients)
{
    const auto& cs = item.counterspeech;
    EvalRecord rec;
    rec.post_id = item.post_id;
    rec.level = cs.level;
    rec.text = cs.text;
    rec.fkre = cs.fkre.clamped;
    rec.target_distance = target_distance(cs.fkre, cs.level);
    rec.refusal = cs.refusal;
    if (cs.refusal)
        rec.errors.push_back("refusal");

    auto metric = [&](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            rec.errors.push_back(std::string(name) + ": " + e.what());
        }
    };
    metric("politeness", [&] {
        if (!clients.politeness)
            throw Error("no politeness scorer configured");
        rec.politeness = clients.politeness->score(cs.text);
    });
    metric("preference", [&] {
        if (!clients.preference_judge)
            throw Error("no preference judge configured");
        const auto r = judge_preference(*clients.preference_judge, cs.text, item.misinformation, cs.level,
                                        clients.retry);
        rec.rating = r.rating;
        rec.preference = r.preference();
    });
    metric("factual", [&] {
        if (!clients.factual_judge)
            throw Error("no factual judge configured");
        const auto f = judge_factual(*clients.factual_judge, cs.text, clients.retry);
        rec.factual = f.label;
        rec.factual_explanation = f.explanation;
    });
    return rec;
}

EvalReport aggregate(std::vector<EvalRecord> records)
{
    if (records.empty())
        throw Error("no records");
    EvalReport report;
    for (const auto level : kAllLevels) {
        LevelSummary s;
        s.level = level;
        std::vector<double> pol, td, pref;
        std::size_t correct = 0;
        for (const auto& r : records) {
            if (r.level != level)
                continue;
            ++s.n;
            if (r.failed()) {
                ++s.failed;
                continue;
            }
            pol.push_back(*r.politeness);
            td.push_back(r.target_distance);
            pref.push_back(*r.preference);
            correct += static_cast<std::size_t>(*r.factual == 1);
        }
        if (s.n == 0)
            continue;
        if (!td.empty()) {
            s.politeness = mean_variance(pol);
            s.target_distance = mean_variance(td);
            s.preference = mean_variance(pref);
            s.factual_accuracy = static_cast<double>(correct) / static_cast<double>(td.size());
        }
        report.levels.push_back(s);
    }

    auto average = [&](auto member) -> std::optional<MeanVar> {
        MeanVar out;
        for (const auto& s : report.levels) {
            const auto& mv = s.*member;
            if (!mv)
                return std::nullopt;
            out.mean += mv->mean;
            out.variance += mv->variance;
            out.n += mv->n;
        }
        const double k = static_cast<double>(report.levels.size());
        out.mean /= k;
        out.variance /= k;
        return out;
    };
    report.average.politeness = average(&LevelSummary::politeness);
    report.average.target_distance = average(&LevelSummary::target_distance);
    report.average.preference = average(&LevelSummary::preference);
    if (std::all_of(report.levels.begin(), report.levels.end(), [](const auto& s) { return s.factual_accuracy; })) {
        double acc = 0.0;
        for (const auto& s : report.levels)
            acc += *s.factual_accuracy;
        report.average.factual_accuracy = acc / static_cast<double>(report.levels.size());
    }
    for (const auto& r : records)
        report.record_hashes.push_back(r.hash());
    report.records = std::move(records);
    return report;
}

EvalReport evaluate_corpus(const std::vector<EvalItem>& items, const EvalClients& clients)
{
    if (items.empty())
        throw Error("no records");
    auto outcomes = bounded_map<EvalRecord>(items.size(), clients.max_inflight,
                                            [&](std::size_t i) { return evaluate_one(items[i], clients); });
    std::vector<EvalRecord> records;
    records.reserve(items.size());
    for (auto& o : outcomes)
        records.push_back(std::move(*o.value)); // evaluate_one never throws
    return aggregate(std::move(records));
}

namespace {

std::string cell(const std::optional<MeanVar>& mv, bool variance)
{
    if (!mv)
        return "";
    return format_fixed(variance ? mv->variance : mv->mean, 6);
}

std::string cell(const std::optional<double>& v) { return v ? format_fixed(*v, 6) : ""; }

std::string md_cell(const std::optional<MeanVar>& mv)
{
    if (!mv)
        return "n/a";
    return format_fixed(mv->mean, 2) + " (" + format_fixed(mv->variance, 2) + ")";
}

} // namespace

std::string report_csv(const EvalReport& report, std::string_view config_hash)
{
    std::ostringstream out;
    out << "level,n,failed,politeness_mean,politeness_var,target_distance_mean,target_distance_var,"
           "preference_mean,preference_var,factual_accuracy,config_hash\n";
    std::size_t n = 0, failed = 0;
    for (const auto& s : report.levels) {
        out << to_string(s.level) << ',' << s.n << ',' << s.failed << ',' << cell(s.politeness, false) << ','
            << cell(s.politeness, true) << ',' << cell(s.target_distance, false) << ','
            << cell(s.target_distance, true) << ',' << cell(s.preference, false) << ','
            << cell(s.preference, true) << ',' << cell(s.factual_accuracy) << ',' << config_hash << '\n';
        n += s.n;
        failed += s.failed;
    }
    const auto& a = report.average;
    out << "avg," << n << ',' << failed << ',' << cell(a.politeness, false) << ',' << cell(a.politeness, true) << ','
        << cell(a.target_distance, false) << ',' << cell(a.target_distance, true) << ','
        << cell(a.preference, false) << ',' << cell(a.preference, true) << ',' << cell(a.factual_accuracy) << ','
        << config_hash << '\n';
    return out.str();
}

std::string report_markdown(const EvalReport& report, std::string_view title, std::string_view config_hash)
{
    std::ostringstream out;
    out << "# " << title << "\n\n";
    if (!config_hash.empty())
        out << "Config hash: `" << config_hash << "`\n\n";
    out << "| Literacy Level | Politeness | Target Distance (lower is better) | User Preference | Factual Accuracy "
           "| Failed |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& s : report.levels)
        out << "| " << to_string(s.level) << " | " << md_cell(s.politeness) << " | " << md_cell(s.target_distance)
            << " | " << md_cell(s.preference) << " | "
            << (s.factual_accuracy ? format_fixed(*s.factual_accuracy, 2) : std::string("n/a")) << " | "
            << s.failed << "/" << s.n << " |\n";
    const auto& a = report.average;
    out << "| **Avg.** | " << md_cell(a.politeness) << " | " << md_cell(a.target_distance) << " | "
        << md_cell(a.preference) << " | "
        << (a.factual_accuracy ? format_fixed(*a.factual_accuracy, 2) : std::string("n/a")) << " | |\n\n";
    out << "Mean (population variance) across records; failed records are excluded.\n";
    return out.str();
}

bool CrossEvalMatrix::strictly_diagonally_dominant() const
{
    for (std::size_t i = 0; i < 3; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            if (j != i)
                off += std::abs(cell[i][j].mean);
        if (!(std::abs(cell[i][i].mean) > off))
            return false;
    }
    return true;
}

std::string CrossEvalMatrix::csv() const
{
    std::ostringstream out;
    out << "counterspeech_level,user_level,mean,variance,n\n";
    for (auto ci : kAllLevels)
        for (auto uj : kAllLevels) {
            const auto& c = cell[level_index(ci)][level_index(uj)];
            out << to_string(ci) << ',' << to_string(uj) << ',' << format_fixed(c.mean, 6) << ','
                << format_fixed(c.variance, 6) << ',' << c.n << '\n';
        }
    return out.str();
}

std::string CrossEvalMatrix::markdown() const
{
    std::ostringstream out;
    out << "| Counterspeech \\ User | low | medium | high |\n|---|---|---|---|\n";
    for (auto ci : kAllLevels) {
        out << "| " << to_string(ci);
        for (auto uj : kAllLevels) {
            const auto& c = cell[level_index(ci)][level_index(uj)];
            out << " | " << format_fixed(c.mean, 2) << " (" << format_fixed(c.variance, 2) << ")";
        }
        out << " |\n";
    }
    return out.str();
}

CrossEvalMatrix cross_eval(const std::map<Level, std::vector<EvalItem>>& by_level, const ChatClient& judge,
                           const RetryPolicy& retry, std::size_t max_inflight)
{
    for (auto l : kAllLevels) {
        auto it = by_level.find(l);
        if (it == by_level.end() || it->second.empty())
            throw InvalidArgument("cross-evaluation is missing counterspeech for level " + to_string(l));
    }
    struct Job {
        std::size_t ci, uj;
        const EvalItem* item;
    };
    std::vector<Job> jobs;
    for (auto ci : kAllLevels)
        for (const auto& item : by_level.at(ci))
            for (auto uj : kAllLevels)
                jobs.push_back({level_index(ci), level_index(uj), &item});

    auto outcomes = bounded_map<double>(jobs.size(), max_inflight, [&](std::size_t k) {
        const auto& j = jobs[k];
        return judge_preference(judge, j.item->counterspeech.text, j.item->misinformation,
                                kAllLevels[j.uj], retry)
            .preference();
    });

    CrossEvalMatrix m;
    std::array<std::array<std::vector<double>, 3>, 3> values;
    std::string first_error;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!outcomes[k].ok()) {
            if (!m.failed++)
                first_error = describe(outcomes[k].error);
            continue;
        }
        values[jobs[k].ci][jobs[k].uj].push_back(*outcomes[k].value);
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (values[i][j].empty())
                throw Error("every judge call failed for counterspeech level " + to_string(kAllLevels[i]) +
                            ", user level " + to_string(kAllLevels[j]) + ": " + first_error);
            m.cell[i][j] = mean_variance(values[i][j]);
        }
    return m;
}

} // namespace litctl

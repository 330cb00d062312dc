#include "litctl/chat.hpp"
#include "litctl/evaluation.hpp"
#include "litctl/util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace litctl {

namespace {

// Any three sentences from one bank keep the text inside that bank's band.
const std::array<std::vector<std::string_view>, 3> kBanks = {{
    {
        "Shots are safe for most kids.",
        "They help your body fight germs.",
        "Ask your nurse if you have a question.",
        "Lots of kids get them each year and stay well.",
        "This claim is not true.",
        "The facts are clear.",
        "Wash your hands and stay home when you are sick.",
        "A shot is like a seat belt for your body.",
        "It is okay to feel unsure.",
        "We all want to keep our kids safe.",
    },
    {
        "Vaccines teach your immune system to recognize a germ before you get sick.",
        "Large studies have followed millions of people and found that serious side effects are rare.",
        "Your doctor can explain which vaccines are recommended and when to get each one.",
        "Masks lower the amount of virus that reaches the people around you.",
        "Experts keep checking the safety results, and they share updates with the public.",
        "Mild soreness or a low fever can happen, but it usually passes in a day or two.",
        "Having questions is normal, and talking with a pharmacist is a helpful next step.",
    },
    {
        "Large clinical trials and ongoing safety monitoring consistently show that serious reactions to "
        "vaccination are rare.",
        "Vaccination builds immune memory that substantially lowers the risk of severe illness and "
        "hospitalization.",
        "A chronic condition that appears after an injection is not necessarily caused by it, since timing alone "
        "does not establish causation.",
        "Regulatory agencies evaluate new safety data continuously and investigate potential signals "
        "independently.",
        "Your skepticism is understandable, and reviewing the published evidence is a constructive way to "
        "evaluate such claims.",
    },
}};

constexpr std::size_t kSentences = 3;

std::size_t band_index(Band b) { return static_cast<std::size_t>(b); }

std::mt19937_64 rng_for(const std::string& hash, std::uint64_t seed)
{
    return std::mt19937_64(splitmix64(std::stoull(hash.substr(0, 16), nullptr, 16) ^ splitmix64(seed)));
}

std::string generate_text(const std::string& prompt, const ChatRequest& req, const std::string& hash)
{
    std::size_t target = 0;
    if (prompt.find("<|Target Fkre|>60-79") != std::string::npos)
        target = 1;
    else if (prompt.find("<|Target Fkre|>0-59") != std::string::npos)
        target = 2;

    const bool sampling = req.temperature > 0.0;
    const bool has_evidence = prompt.find("\nRelevant evidence:\n") != std::string::npos;
    auto rng = rng_for(hash, sampling ? req.seed.value_or(0) : 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const double drift = sampling ? 0.35 : (has_evidence ? 0.0 : 0.3);
    std::size_t band = target;
    if (u(rng) < drift) {
        if (target == 1)
            band = (rng() & 1) ? 0 : 2;
        else
            band = 1;
    }

    std::vector<std::string_view> pool = kBanks[band];
    std::shuffle(pool.begin(), pool.end(), rng);
    std::string text;
    for (std::size_t i = 0; i < kSentences; ++i) {
        if (i)
            text.push_back(' ');
        text += pool[i];
    }
    return text;
}

// Text between `open` and the next `close` after it.
std::string between(const std::string& s, std::string_view open, std::string_view close)
{
    auto a = s.find(open);
    if (a == std::string::npos)
        return {};
    a += open.size();
    auto b = s.find(close, a);
    return s.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

std::string rate_preference(const std::string& prompt, std::size_t persona)
{
    const auto cs = between(prompt, "Counterspeech_Response: \"", "\"\n\nEvaluate");
    try {
        const auto band = band_index(classify_band(fkre_score(cs)));
        const std::size_t d = band > persona ? band - persona : persona - band;
        static constexpr std::array<int, 3> kByDistance = {5, 2, 1};
        return std::to_string(kByDistance[d]);
    } catch (const Error&) {
        return "1";
    }
}

} // namespace

std::string SimulatedChatClient::complete(const ChatRequest& req) const
{
    if (req.messages.empty())
        throw InvalidArgument("chat request has no messages");
    const std::string& prompt = req.messages.back().content;
    const auto hash = prompt_hash(req);

    if (prompt.starts_with("<|Target Fkre|>"))
        return generate_text(prompt, req, hash);

    static constexpr std::array<std::string_view, 3> kPersonas = {
        "Assume you are a user with low health literacy",
        "Assume you are a user with medium health literacy",
        "Assume you are a user with high health literacy",
    };
    for (std::size_t p = 0; p < kPersonas.size(); ++p)
        if (prompt.starts_with(kPersonas[p]))
            return rate_preference(prompt, p);

    if (prompt.starts_with("You are an expert fact-checker")) {
        const auto cs = between(prompt, "Counter-Speech Response:\n\"", "\"\n\nEvaluation Instructions");
        if (trim_copy(cs).empty())
            return "Label: 0\nExplanations: The response is empty.";
        return "Label: 1\nExplanations: The claims agree with published public health guidance.";
    }

    if (prompt.starts_with("Rate how polite")) {
        const double p = lexicon_politeness(between(prompt, "Text: \"", "\"\n\nProvide"));
        return std::to_string(1 + static_cast<int>(std::lround(p * 4.0)));
    }

    return "I'm sorry, but I can't help with that request.";
}

} // namespace litctl

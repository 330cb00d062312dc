#include "litctl/readability.hpp"

#include "litctl/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace litctl {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_vowel_at(std::string_view w, std::size_t i)
{
    switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
        return true;
    case 'y':
        return i > 0; // leading y is a consonant: "yes", "you"
    default:
        return false;
    }
}

bool is_consonant_at(std::string_view w, std::size_t i) { return !is_vowel_at(w, i); }

int vowel_groups(std::string_view w)
{
    int groups = 0;
    bool in_group = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        bool v = is_vowel_at(w, i);
        if (v && !in_group)
            ++groups;
        in_group = v;
    }
    return groups;
}

bool ends_with(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// True when the word's final vowel group is a silent e (or "es"/"ed" ending).
bool has_silent_ending(std::string_view w)
{
    const std::size_t n = w.size();
    if (n >= 3 && w[n - 1] == 'e') {
        if (!is_consonant_at(w, n - 2))
            return false;
        // consonant + "le" is voiced: table, people
        if (w[n - 2] == 'l' && is_consonant_at(w, n - 3))
            return false;
        return true;
    }
    if (n >= 4 && ends_with(w, "es")) {
        if (!is_consonant_at(w, n - 3))
            return false;
        char c = w[n - 3];
        if (c == 's' || c == 'x' || c == 'z' || c == 'c' || c == 'g')
            return false;
        if (c == 'h' && (w[n - 4] == 'c' || w[n - 4] == 's'))
            return false;
        if (c == 'l' && is_consonant_at(w, n - 4))
            return false;
        return true;
    }
    if (n >= 4 && ends_with(w, "ed")) {
        if (!is_consonant_at(w, n - 3))
            return false;
        char c = w[n - 3];
        return c != 't' && c != 'd';
    }
    return false;
}

int base_count(std::string_view w)
{
    int groups = vowel_groups(w);
    if (groups > 1 && has_silent_ending(w))
        --groups;
    return std::max(groups, 1);
}

const std::unordered_map<std::string_view, int>& exception_table()
{
    static const std::unordered_map<std::string_view, int> table = {
#include "syllable_exceptions.inc"
    };
    return table;
}

constexpr std::array<std::string_view, 5> kSuffixes = {"ly", "ful", "ment", "less", "ness"};

// Letters-only lowercase word.
int count_simple(const std::string& w)
{
    const auto& table = exception_table();
    if (auto it = table.find(w); it != table.end())
        return it->second;
    // A silent e before a consonant suffix: safely, statement, careless.
    for (auto suffix : kSuffixes) {
        if (w.size() <= suffix.size() + 2 || !ends_with(w, suffix))
            continue;
        std::string_view stem(w.data(), w.size() - suffix.size());
        if (stem.back() == 'e' && vowel_groups(stem) > 1)
            return base_count(stem) + vowel_groups(suffix);
    }
    return base_count(w);
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}'; }

constexpr std::array<std::string_view, 19> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "vs.", "e.g.",
    "i.e.", "u.s.", "no.", "approx.", "fig.", "inc.", "ltd.", "dept.", "gov.",
};

bool is_abbreviation(std::string_view token)
{
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // drop leading openers such as '(' or '"'
    auto first = lower.find_first_not_of("\"'([{");
    if (first == std::string::npos)
        return false;
    std::string_view core(lower);
    core.remove_prefix(first);
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), core) != kAbbreviations.end();
}

bool has_alnum(std::string_view s) { return std::any_of(s.begin(), s.end(), is_alnum); }

std::string_view trim(std::string_view s)
{
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

} // namespace

FkreScore FkreScore::from_raw(double raw) { return {raw, std::clamp(raw, 0.0, 100.0)}; }

BandRange band_range(Level level)
{
    switch (level) {
    case Level::low: return {80.0, 100.0};
    case Level::medium: return {60.0, 79.0};
    case Level::high: return {0.0, 59.0};
    }
    throw InvalidArgument("unknown level");
}

Band band_for(Level level)
{
    switch (level) {
    case Level::low: return Band::easy;
    case Level::medium: return Band::medium;
    case Level::high: return Band::hard;
    }
    throw InvalidArgument("unknown level");
}

Level level_for(Band band)
{
    switch (band) {
    case Band::easy: return Level::low;
    case Band::medium: return Level::medium;
    case Band::hard: return Level::high;
    }
    throw InvalidArgument("unknown band");
}

std::string to_string(Level level)
{
    switch (level) {
    case Level::low: return "low";
    case Level::medium: return "medium";
    case Level::high: return "high";
    }
    return "?";
}

std::string to_string(Band band)
{
    switch (band) {
    case Band::easy: return "easy";
    case Band::medium: return "medium";
    case Band::hard: return "hard";
    }
    return "?";
}

Level parse_level(std::string_view s)
{
    if (s == "low") return Level::low;
    if (s == "medium") return Level::medium;
    if (s == "high") return Level::high;
    throw InvalidArgument("unknown literacy level '" + std::string(s) + "'");
}

Band parse_band(std::string_view s)
{
    if (s == "easy") return Band::easy;
    if (s == "medium") return Band::medium;
    if (s == "hard") return Band::hard;
    throw InvalidArgument("unknown band '" + std::string(s) + "'");
}

int count_syllables(std::string_view word)
{
    int total = 0;
    bool any = false;
    std::size_t start = 0;
    while (start <= word.size()) {
        std::size_t end = word.find('-', start);
        if (end == std::string_view::npos)
            end = word.size();
        std::string part;
        for (char c : word.substr(start, end - start))
            if (is_alpha(c))
                part.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (!part.empty()) {
            total += count_simple(part);
            any = true;
        }
        start = end + 1;
    }
    if (!any)
        throw InvalidArgument("not a word");
    return total;
}

std::vector<std::string> tokenize_words(std::string_view text)
{
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i]))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j]))
            ++j;
        std::string_view tok = text.substr(i, j - i);
        while (!tok.empty() && !is_alnum(tok.front()))
            tok.remove_prefix(1);
        while (!tok.empty() && !is_alnum(tok.back()))
            tok.remove_suffix(1);
        if (std::any_of(tok.begin(), tok.end(), is_alpha))
            words.emplace_back(tok);
        i = j;
    }
    return words;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> sentences;
    std::size_t seg_start = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t end) {
        auto seg = trim(text.substr(seg_start, end - seg_start));
        if (has_alnum(seg))
            sentences.emplace_back(seg);
        seg_start = end;
    };
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i]))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j]))
            ++j;
        std::string_view tok = text.substr(i, j - i);
        std::string_view core = tok;
        while (!core.empty() && is_closer(core.back()))
            core.remove_suffix(1);
        if (!core.empty()) {
            char last = core.back();
            bool terminal = last == '!' || last == '?' || (last == '.' && !is_abbreviation(core));
            if (terminal)
                emit(j);
        }
        i = j;
    }
    emit(text.size());
    return sentences;
}

TextStats text_stats(std::string_view text)
{
    TextStats stats;
    for (const auto& w : tokenize_words(text)) {
        ++stats.words;
        stats.syllables += static_cast<std::size_t>(count_syllables(w));
    }
    stats.sentences = split_sentences(text).size();
    return stats;
}

FkreScore fkre_from_stats(const TextStats& stats)
{
    if (stats.words == 0 || stats.sentences == 0)
        throw InvalidArgument("unscoreable text");
    const double words = static_cast<double>(stats.words);
    const double raw = 206.835 - 1.015 * (words / static_cast<double>(stats.sentences)) -
                       84.6 * (static_cast<double>(stats.syllables) / words);
    return FkreScore::from_raw(raw);
}

FkreScore fkre_score(std::string_view text) { return fkre_from_stats(text_stats(text)); }

Band classify_band(double clamped)
{
    if (clamped >= 80.0)
        return Band::easy;
    if (clamped >= 60.0)
        return Band::medium;
    return Band::hard;
}

Band classify_band(const FkreScore& score) { return classify_band(score.clamped); }

double target_distance(double clamped, Level level)
{
    const auto [lo, hi] = band_range(level);
    if (clamped >= lo && clamped <= hi)
        return 0.0;
    return std::min(std::abs(clamped - lo), std::abs(clamped - hi));
}

double target_distance(const FkreScore& score, Level level)
{
    return target_distance(score.clamped, level);
}

} // namespace litctl

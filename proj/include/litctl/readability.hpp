#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace litctl {

/// Flesch Reading Ease of a text. `raw` is unbounded; `clamped` is raw limited to [0, 100].
struct FkreScore {
    double raw = 0.0;
    double clamped = 0.0;

    static FkreScore from_raw(double raw);
    bool operator==(const FkreScore&) const = default;
};

/// Readability bands. Higher FKRE means easier text.
enum class Band { easy, medium, hard };

/// Target audience health literacy. low reads easy text, high reads hard text.
enum class Level { low, medium, high };

inline constexpr Level kAllLevels[] = {Level::low, Level::medium, Level::high};

/// FKRE interval [lo, hi] a level is written for.
struct BandRange {
    double lo;
    double hi;
};

BandRange band_range(Level level);
Band band_for(Level level);
Level level_for(Band band);

std::string to_string(Level level);
std::string to_string(Band band);
Level parse_level(std::string_view s);
Band parse_band(std::string_view s);

/// Raw counts behind an FKRE score.
struct TextStats {
    std::size_t words = 0;
    std::size_t sentences = 0;
    std::size_t syllables = 0;
};

/// Syllables in one word using vowel groups, a silent-e rule and an
/// exception table. Hyphenated tokens sum their parts. Throws
/// InvalidArgument("not a word") when the token has no letters.
int count_syllables(std::string_view word);

/// Whitespace tokens with leading/trailing punctuation stripped. Tokens
/// without any letter are not words and are dropped.
std::vector<std::string> tokenize_words(std::string_view text);

/// Splits on '.', '!' or '?' followed by whitespace or end of text, except
/// after a known abbreviation. Segments without any letter or digit are dropped.
std::vector<std::string> split_sentences(std::string_view text);

TextStats text_stats(std::string_view text);

/// 206.835 - 1.015 * words/sentences - 84.6 * syllables/words over the
/// whole text. Throws InvalidArgument("unscoreable text") on zero words or sentences.
FkreScore fkre_score(std::string_view text);
FkreScore fkre_from_stats(const TextStats& stats);

/// easy iff clamped >= 80, medium iff 60 <= clamped < 80, hard otherwise.
Band classify_band(const FkreScore& score);
Band classify_band(double clamped);

/// Distance from the clamped score to the level's band, 0 when inside.
double target_distance(const FkreScore& score, Level level);
double target_distance(double clamped, Level level);

} // namespace litctl

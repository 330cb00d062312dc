#pragma once

#include "litctl/readability.hpp"

#include <span>

namespace litctl {

struct RewardConfig {
    double alpha = 0.5;         // weight of the readability term
    double sigmoid_scale = 5.0; // transition width in FKRE points
    Level level = Level::low;   // supplies the band [L, R]

    void validate() const;
};

struct RewardBreakdown {
    double r_read = 0.0;
    double r_pref = 0.0;
    double total = 0.0;
};

double logistic(double x);

/// Double sigmoid sigma((F - L)/s) - sigma((F - R)/s): close to 1 inside
/// [L, R], decaying to 0 on both sides. Pass the clamped FKRE as F.
double readability_reward(double fkre, const RewardConfig& cfg);
double readability_reward(const FkreScore& score, const RewardConfig& cfg);

/// Likert rating 1..5 mapped to rating / 5.
double preference_reward(int rating);

/// Mean of several judge ratings, mapped the same way.
double preference_reward(std::span<const int> ratings);

/// alpha * r_read + (1 - alpha) * r_pref.
RewardBreakdown composite_reward(double r_read, double r_pref, double alpha = 0.5);

/// Readability of `text` plus a judge rating, combined under `cfg`.
RewardBreakdown score_response(const FkreScore& fkre, std::span<const int> ratings, const RewardConfig& cfg);

} // namespace litctl

#include "litctl/reward.hpp"

#include "litctl/error.hpp"

#include <cmath>
#include <string>

namespace litctl {

void RewardConfig::validate() const
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("alpha must lie in [0, 1]");
    if (!(sigmoid_scale > 0.0))
        throw InvalidArgument("sigmoid_scale must be positive");
}

double logistic(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double readability_reward(double fkre, const RewardConfig& cfg)
{
    cfg.validate();
    const auto [lo, hi] = band_range(cfg.level);
    return logistic((fkre - lo) / cfg.sigmoid_scale) - logistic((fkre - hi) / cfg.sigmoid_scale);
}

double readability_reward(const FkreScore& score, const RewardConfig& cfg)
{
    return readability_reward(score.clamped, cfg);
}

double preference_reward(int rating)
{
    if (rating < 1 || rating > 5)
        throw InvalidArgument("rating " + std::to_string(rating) + " outside 1..5");
    return rating / 5.0;
}

double preference_reward(std::span<const int> ratings)
{
    if (ratings.empty())
        throw InvalidArgument("no ratings");
    double sum = 0.0;
    for (int r : ratings)
        sum += preference_reward(r);
    return sum / static_cast<double>(ratings.size());
}

RewardBreakdown composite_reward(double r_read, double r_pref, double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("alpha must lie in [0, 1]");
    return {r_read, r_pref, alpha * r_read + (1.0 - alpha) * r_pref};
}

RewardBreakdown score_response(const FkreScore& fkre, std::span<const int> ratings, const RewardConfig& cfg)
{
    return composite_reward(readability_reward(fkre, cfg), preference_reward(ratings), cfg.alpha);
}

} // namespace litctl

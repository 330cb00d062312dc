#pragma once

#include "litctl/error.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace litctl {

struct GrpoConfig {
    std::size_t n_completions = 4;
    double beta = 0.2;           // KL coefficient
    double learning_rate = 0.1;  // tabular scale; LLM runs use 5e-6
    std::size_t epochs = 3;      // LLM-scale setting, exported to the trainer
    std::size_t iterations = 500;
    double epsilon = 1e-8;       // added to the group std
    std::uint64_t seed = 7;

    void validate() const;
};

/// Softmax policy over a finite response set.
class TabularPolicy {
public:
    explicit TabularPolicy(std::vector<double> logits);
    static TabularPolicy uniform(std::size_t n);

    std::size_t size() const { return logits_.size(); }
    const std::vector<double>& logits() const { return logits_; }
    std::vector<double>& logits() { return logits_; }
    std::vector<double> probabilities() const;
    double log_prob(std::size_t response) const;

    /// Inverse-CDF draw from the policy using `bits` as the uniform source.
    std::size_t sample(std::uint64_t bits) const;

private:
    std::vector<double> logits_;
};

/// One prompt's group: sampled responses (indices into the response set),
/// their rewards and group-relative advantages.
struct GroupSample {
    std::string prompt_id;
    std::vector<std::size_t> responses;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

/// (r_i - mean) / (population std + epsilon); all zeros for a constant group.
std::vector<double> compute_advantages(std::span<const double> rewards, double epsilon = 1e-8);

/// sum p_i ln(p_i / q_i). Terms with p_i = 0 contribute 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const TabularPolicy& p, const TabularPolicy& q);

double total_variation(std::span<const double> p, std::span<const double> q);

/// Surrogate mean_i[a_i * ln pi(y_i)] - beta * KL(pi || ref).
double grpo_objective(const GroupSample& group, const TabularPolicy& policy,
                      const TabularPolicy& reference, double beta);

/// Analytic gradient of grpo_objective with respect to the policy logits.
std::vector<double> grpo_gradient(const GroupSample& group, const TabularPolicy& policy,
                                  const TabularPolicy& reference, double beta);

struct TraceRow {
    std::size_t iteration = 0;
    double mean_reward = 0.0; // expected reward under the policy after the update
    double kl = 0.0;          // KL(policy || reference) after the update
};

struct TrainResult {
    TabularPolicy policy;
    std::vector<TraceRow> trace;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, std::vector<TraceRow> trace)
        : Error(what), trace_(std::move(trace)) {}
    const std::vector<TraceRow>& trace() const { return trace_; }

private:
    std::vector<TraceRow> trace_;
};

using ResponseReward = std::function<double(std::size_t response)>;

/// Sample a group, score it, standardize, take one ascent step; repeat.
/// Deterministic for a given cfg.seed.
TrainResult train_tabular(TabularPolicy policy, const TabularPolicy& reference,
                          const ResponseReward& reward_fn, const GrpoConfig& cfg);

/// Rolling mean over `window` entries (shorter at the start).
std::vector<double> rolling_mean(std::span<const double> values, std::size_t window);

/// Index of the largest value, lowest index on ties. Throws on empty input.
std::size_t argmax_first(std::span<const double> values);

/// Index of the highest-reward candidate, lowest index on ties.
template <typename T, typename RewardFn>
std::size_t best_of_n(std::span<const T> candidates, RewardFn&& reward)
{
    if (candidates.empty())
        throw InvalidArgument("best_of_n needs at least one candidate");
    std::vector<double> totals;
    totals.reserve(candidates.size());
    for (const auto& c : candidates)
        totals.push_back(reward(c));
    return argmax_first(totals);
}

std::string trace_csv(std::span<const TraceRow> trace);

} // namespace litctl

#include "litctl/grpo.hpp"

#include "litctl/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace litctl {

void GrpoConfig::validate() const
{
    if (n_completions < 2)
        throw InvalidArgument("n_completions must be at least 2");
    if (!(beta >= 0.0))
        throw InvalidArgument("beta must be non-negative");
    if (!(learning_rate > 0.0))
        throw InvalidArgument("learning_rate must be positive");
    if (!(epsilon >= 0.0))
        throw InvalidArgument("epsilon must be non-negative");
}

TabularPolicy::TabularPolicy(std::vector<double> logits) : logits_(std::move(logits))
{
    if (logits_.empty())
        throw InvalidArgument("policy needs at least one response");
}

TabularPolicy TabularPolicy::uniform(std::size_t n) { return TabularPolicy(std::vector<double>(n, 0.0)); }

std::vector<double> TabularPolicy::probabilities() const
{
    const double mx = *std::max_element(logits_.begin(), logits_.end());
    std::vector<double> p(logits_.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits_[i] - mx);
        z += p[i];
    }
    for (double& v : p)
        v /= z;
    return p;
}

double TabularPolicy::log_prob(std::size_t response) const
{
    const double mx = *std::max_element(logits_.begin(), logits_.end());
    double z = 0.0;
    for (double l : logits_)
        z += std::exp(l - mx);
    return logits_.at(response) - mx - std::log(z);
}

std::size_t TabularPolicy::sample(std::uint64_t bits) const
{
    const auto p = probabilities();
    const double u = unit_interval(bits);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc)
            return i;
    }
    return p.size() - 1;
}

std::vector<double> compute_advantages(std::span<const double> rewards, double epsilon)
{
    if (rewards.size() < 2)
        throw InvalidArgument("advantages need at least 2 rewards");
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    std::vector<double> adv(rewards.size(), 0.0);
    if (*lo == *hi)
        return adv;
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : rewards)
        ss += (r - mean) * (r - mean);
    const double denom = std::sqrt(ss / n) + epsilon;
    for (std::size_t i = 0; i < rewards.size(); ++i)
        adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

double kl_divergence(std::span<const double> p, std::span<const double> q)
{
    if (p.size() != q.size())
        throw InvalidArgument("KL support mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0)
            continue;
        if (q[i] <= 0.0)
            throw InvalidArgument("KL undefined: q has zero mass where p does not");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(kl, 0.0);
}

double kl_divergence(const TabularPolicy& p, const TabularPolicy& q)
{
    return kl_divergence(p.probabilities(), q.probabilities());
}

double total_variation(std::span<const double> p, std::span<const double> q)
{
    if (p.size() != q.size())
        throw InvalidArgument("support mismatch");
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

namespace {

void check_group(const GroupSample& g, const TabularPolicy& policy, const TabularPolicy& reference)
{
    if (g.responses.size() != g.advantages.size())
        throw InvalidArgument("group has " + std::to_string(g.responses.size()) + " responses but " +
                              std::to_string(g.advantages.size()) + " advantages");
    if (g.responses.empty())
        throw InvalidArgument("empty group");
    if (policy.size() != reference.size())
        throw InvalidArgument("policy and reference differ in support");
    for (auto r : g.responses)
        if (r >= policy.size())
            throw InvalidArgument("response index out of range");
}

} // namespace

double grpo_objective(const GroupSample& group, const TabularPolicy& policy,
                      const TabularPolicy& reference, double beta)
{
    check_group(group, policy, reference);
    double surrogate = 0.0;
    for (std::size_t i = 0; i < group.responses.size(); ++i)
        surrogate += group.advantages[i] * policy.log_prob(group.responses[i]);
    surrogate /= static_cast<double>(group.responses.size());
    return surrogate - beta * kl_divergence(policy, reference);
}

std::vector<double> grpo_gradient(const GroupSample& group, const TabularPolicy& policy,
                                  const TabularPolicy& reference, double beta)
{
    check_group(group, policy, reference);
    const auto p = policy.probabilities();
    const auto q = reference.probabilities();
    const double n = static_cast<double>(group.responses.size());
    const double adv_sum = std::accumulate(group.advantages.begin(), group.advantages.end(), 0.0);

    // d/dz_j ln pi(y) = [y == j] - pi_j
    std::vector<double> grad(p.size());
    for (std::size_t j = 0; j < p.size(); ++j)
        grad[j] = -p[j] * adv_sum / n;
    for (std::size_t i = 0; i < group.responses.size(); ++i)
        grad[group.responses[i]] += group.advantages[i] / n;

    if (beta != 0.0) {
        // d/dz_j KL(pi || q) = pi_j (ln(pi_j / q_j) - KL)
        const double kl = kl_divergence(p, q);
        for (std::size_t j = 0; j < p.size(); ++j)
            grad[j] -= beta * p[j] * (std::log(p[j] / q[j]) - kl);
    }
    return grad;
}

TrainResult train_tabular(TabularPolicy policy, const TabularPolicy& reference,
                          const ResponseReward& reward_fn, const GrpoConfig& cfg)
{
    cfg.validate();
    if (policy.size() != reference.size())
        throw InvalidArgument("policy and reference differ in support");

    std::vector<double> table(policy.size());
    for (std::size_t j = 0; j < table.size(); ++j)
        table[j] = reward_fn(j);

    std::mt19937_64 rng(cfg.seed);
    std::vector<TraceRow> trace;
    trace.reserve(cfg.iterations);
    const auto ref_p = reference.probabilities();

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        GroupSample group;
        group.prompt_id = "tabular";
        for (std::size_t k = 0; k < cfg.n_completions; ++k) {
            auto y = policy.sample(rng());
            group.responses.push_back(y);
            group.rewards.push_back(table[y]);
        }
        group.advantages = compute_advantages(group.rewards, cfg.epsilon);

        const auto grad = grpo_gradient(group, policy, reference, cfg.beta);
        for (std::size_t j = 0; j < grad.size(); ++j)
            policy.logits()[j] += cfg.learning_rate * grad[j];

        if (!std::all_of(policy.logits().begin(), policy.logits().end(),
                         [](double v) { return std::isfinite(v); }))
            throw TrainingDiverged("non-finite logits at iteration " + std::to_string(it), trace);

        const auto p = policy.probabilities();
        double expected = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j)
            expected += p[j] * table[j];
        trace.push_back({it, expected, kl_divergence(p, ref_p)});
    }
    return {std::move(policy), std::move(trace)};
}

std::vector<double> rolling_mean(std::span<const double> values, std::size_t window)
{
    if (window == 0)
        throw InvalidArgument("window must be positive");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t k = first; k <= i; ++k)
            sum += values[k];
        out[i] = sum / static_cast<double>(i + 1 - first);
    }
    return out;
}

std::size_t argmax_first(std::span<const double> values)
{
    if (values.empty())
        throw InvalidArgument("argmax of empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return best;
}

std::string trace_csv(std::span<const TraceRow> trace)
{
    std::ostringstream out;
    out << "iteration,mean_reward,kl\n";
    for (const auto& row : trace)
        out << row.iteration << ',' << format_fixed(row.mean_reward, 9) << ',' << format_fixed(row.kl, 9) << '\n';
    return out.str();
}

} // namespace litctl

#include "doctest.h"

#include "litctl/grpo.hpp"
#include "litctl/reward.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <random>

using namespace litctl;

TEST_CASE("compute_advantages")
{
    std::array<double, 4> r{1, 2, 3, 4};
    auto a = compute_advantages(r, 1e-8);
    REQUIRE(a.size() == 4);
    CHECK(a[0] == doctest::Approx(-1.3416).epsilon(1e-4));
    CHECK(a[1] == doctest::Approx(-0.4472).epsilon(1e-4));
    CHECK(a[2] == doctest::Approx(0.4472).epsilon(1e-4));
    CHECK(a[3] == doctest::Approx(1.3416).epsilon(1e-4));

    std::array<double, 4> flat{0.7, 0.7, 0.7, 0.7};
    for (double v : compute_advantages(flat))
        CHECK(v == 0.0);

    std::array<double, 1> one{1.0};
    CHECK_THROWS_AS(compute_advantages(one), InvalidArgument);
    CHECK(GrpoConfig{}.n_completions == 4);
    CHECK(GrpoConfig{}.beta == 0.2);
}

TEST_CASE("advantage invariants")
{
    // With epsilon = 0 the invariants are exact; the default epsilon shrinks
    // every advantage by the factor std / (std + epsilon).
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    auto pop_std = [](const std::vector<double>& v) {
        double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(v.size()));
    };
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 2 + rng() % 7;
        std::vector<double> r(n);
        for (auto& v : r)
            v = u(rng);
        const double sd = pop_std(r);
        for (double eps : {0.0, 1e-8}) {
            auto a = compute_advantages(r, eps);
            double sum = std::accumulate(a.begin(), a.end(), 0.0);
            CHECK(std::abs(sum) < 1e-9 * static_cast<double>(n));
            double var = 0.0;
            for (double v : a)
                var += v * v;
            const double shrink = sd / (sd + eps);
            CHECK(var / static_cast<double>(n) == doctest::Approx(shrink * shrink).epsilon(1e-9));
            if (sd > 0.01)
                CHECK(var / static_cast<double>(n) == doctest::Approx(1.0).epsilon(1e-6));

            const double c = scale(rng), shift = u(rng) * 5.0 - 2.5;
            std::vector<double> scaled(n), shifted(n);
            for (std::size_t i = 0; i < n; ++i) {
                scaled[i] = c * r[i];
                shifted[i] = r[i] + shift;
            }
            auto as = compute_advantages(scaled, eps);
            auto ah = compute_advantages(shifted, eps);
            // bound on the epsilon effect: |a| * eps / std per entry, times the scale change
            const double tol = 1e-9 + (eps > 0 ? 3.0 * eps / (std::min(c, 1.0) * sd) : 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(as[i] - a[i]) <= tol);
                CHECK(std::abs(ah[i] - a[i]) <= tol);
            }
        }
    }
}

TEST_CASE("kl_divergence")
{
    std::array<double, 2> p{0.75, 0.25}, q{0.5, 0.5};
    CHECK(kl_divergence(p, q) == doctest::Approx(0.130812036).epsilon(1e-8));
    CHECK(kl_divergence(p, p) == 0.0);
    std::array<double, 3> three{0.2, 0.3, 0.5};
    CHECK_THROWS_AS(kl_divergence(p, three), InvalidArgument);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> lp(6), lq(6);
        for (auto& v : lp) v = g(rng);
        for (auto& v : lq) v = g(rng);
        TabularPolicy a(lp), b(lq);
        CHECK(kl_divergence(a, b) >= 0.0);
        CHECK(kl_divergence(a, a) == 0.0);
    }
}

TEST_CASE("TabularPolicy")
{
    TabularPolicy pol({0.0, std::log(2.0), 0.0});
    auto p = pol.probabilities();
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    CHECK(pol.log_prob(1) == doctest::Approx(std::log(0.5)));
    CHECK(pol.sample(0) == 0);
    CHECK(pol.sample(~std::uint64_t{0}) == 2);
    CHECK(pol.sample(std::uint64_t{1} << 63) == 1); // u = 0.5 lands in [0.25, 0.75)

    TabularPolicy extreme({1000.0, -1000.0});
    auto pe = extreme.probabilities();
    CHECK(std::isfinite(pe[1]));
    CHECK_THROWS_AS(TabularPolicy(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("grpo_objective hand expansion")
{
    TabularPolicy pol({0.0, std::log(2.0), 0.0}); // [0.25, 0.5, 0.25]
    auto ref = TabularPolicy::uniform(3);
    GroupSample g{"x", {0, 1, 1, 2}, {0, 1, 1, 0.5}, {-1.0, 0.5, 0.5, 0.0}};
    CHECK(grpo_objective(g, pol, ref, 0.2) == doctest::Approx(0.16150849157434793).epsilon(1e-12));
    CHECK(grpo_objective(g, pol, ref, 0.0) == doctest::Approx(0.1732867951399863).epsilon(1e-12));

    GroupSample zero{"x", {0, 1, 2, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}};
    CHECK(grpo_objective(zero, pol, ref, 0.0) == 0.0);
    for (double v : grpo_gradient(zero, pol, ref, 0.0))
        CHECK(v == 0.0);

    GroupSample bad{"x", {0, 5}, {0, 0}, {0, 0}};
    CHECK_THROWS_AS(grpo_objective(bad, pol, ref, 0.2), InvalidArgument);
}

TEST_CASE("grpo_gradient matches central finite differences")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> lp(5), lq(5);
        for (auto& v : lp) v = g(rng);
        for (auto& v : lq) v = g(rng);
        TabularPolicy pol(lp), ref(lq);
        GroupSample grp{"x", {}, {}, {}};
        for (int k = 0; k < 4; ++k) {
            grp.responses.push_back(rng() % 5);
            grp.rewards.push_back(g(rng));
        }
        grp.advantages = compute_advantages(grp.rewards);
        const double beta = 0.3;
        auto grad = grpo_gradient(grp, pol, ref, beta);
        for (std::size_t j = 0; j < 5; ++j) {
            const double h = 1e-5;
            auto up = lp, dn = lp;
            up[j] += h;
            dn[j] -= h;
            double fd = (grpo_objective(grp, TabularPolicy(up), ref, beta) -
                         grpo_objective(grp, TabularPolicy(dn), ref, beta)) / (2 * h);
            CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
}

namespace {

std::vector<double> fixture_rewards(Level level)
{
    RewardConfig cfg{0.5, 5.0, level};
    std::vector<double> r;
    for (int f = 0; f <= 100; f += 10)
        r.push_back(composite_reward(readability_reward(f, cfg), preference_reward(4), cfg.alpha).total);
    return r;
}

} // namespace

TEST_CASE("train_tabular converges on the in-band response")
{
    auto rewards = fixture_rewards(Level::low);
    // exhaustive check: 90 is the unique maximizer
    std::size_t best = argmax_first(rewards);
    CHECK(best == 9);
    for (std::size_t j = 0; j < rewards.size(); ++j)
        if (j != best)
            CHECK(rewards[j] < rewards[best]);

    GrpoConfig cfg;
    cfg.beta = 0.0;
    cfg.learning_rate = 0.1;
    cfg.iterations = 500;
    cfg.seed = 7;
    auto ref = TabularPolicy::uniform(11);
    auto res = train_tabular(ref, ref, [&](std::size_t j) { return rewards[j]; }, cfg);
    auto p = res.policy.probabilities();
    CHECK(argmax_first(p) == best);
    CHECK(p[best] > 0.5);
    REQUIRE(res.trace.size() == 500);
    CHECK(res.trace.back().mean_reward > res.trace.front().mean_reward);

    // reproducible
    auto again = train_tabular(ref, ref, [&](std::size_t j) { return rewards[j]; }, cfg);
    CHECK(again.policy.logits() == res.policy.logits());
}

TEST_CASE("train_tabular with a dominant KL term stays at the reference")
{
    auto rewards = fixture_rewards(Level::low);
    GrpoConfig cfg;
    cfg.beta = 100.0;
    cfg.iterations = 500;
    auto ref = TabularPolicy::uniform(11);
    auto res = train_tabular(ref, ref, [&](std::size_t j) { return rewards[j]; }, cfg);
    CHECK(total_variation(res.policy.probabilities(), ref.probabilities()) < 0.05);
}

TEST_CASE("train_tabular with constant reward leaves the policy unchanged")
{
    GrpoConfig cfg;
    cfg.beta = 0.0;
    cfg.iterations = 200;
    auto ref = TabularPolicy::uniform(11);
    auto res = train_tabular(ref, ref, [](std::size_t) { return 0.5; }, cfg);
    CHECK(res.policy.logits() == ref.logits());
    for (const auto& row : res.trace)
        CHECK(row.mean_reward == doctest::Approx(0.5));
}

TEST_CASE("train_tabular reports divergence")
{
    GrpoConfig cfg;
    cfg.beta = 0.0;
    cfg.iterations = 50;
    auto ref = TabularPolicy::uniform(3);
    try {
        train_tabular(ref, ref, [](std::size_t j) { return j == 1 ? std::nan("") : static_cast<double>(j); }, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.trace().size() < 50);
    }
    GrpoConfig bad;
    bad.n_completions = 1;
    CHECK_THROWS_AS(train_tabular(ref, ref, [](std::size_t) { return 0.0; }, bad), InvalidArgument);
}

TEST_CASE("best_of_n")
{
    std::vector<double> totals{0.3, 0.9, 0.9};
    auto ident = [](double v) { return v; };
    CHECK(best_of_n(std::span<const double>(totals), ident) == 1);
    std::vector<double> single{0.1};
    CHECK(best_of_n(std::span<const double>(single), ident) == 0);
    CHECK_THROWS_AS(best_of_n(std::span<const double>{}, ident), InvalidArgument);

    // invariant under strictly increasing transforms
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> v(4);
        for (auto& x : v) x = u(rng);
        auto a = best_of_n(std::span<const double>(v), ident);
        auto b = best_of_n(std::span<const double>(v), [](double x) { return std::exp(3 * x) + 7; });
        auto c = best_of_n(std::span<const double>(v), [](double x) { return std::atan(x); });
        CHECK(a == b);
        CHECK(a == c);
    }
}

TEST_CASE("rolling_mean and trace_csv")
{
    std::vector<double> v{1, 2, 3, 4};
    auto m = rolling_mean(v, 2);
    CHECK(m == std::vector<double>{1.0, 1.5, 2.5, 3.5});
    std::vector<TraceRow> rows{{1, 0.5, 0.0}, {2, 0.25, 0.125}};
    CHECK(trace_csv(rows) == "iteration,mean_reward,kl\n1,0.500000000,0.000000000\n2,0.250000000,0.125000000\n");
}

#include "litctl/stats.hpp"

#include "litctl/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace litctl {

namespace {

void check_pair(std::size_t a, std::size_t b, std::size_t min_n)
{
    if (a != b)
        throw InvalidArgument("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    if (a < min_n)
        throw InvalidArgument("need at least " + std::to_string(min_n) + " observations");
}

// Number of inversions in v, sorted in place (merge sort).
std::size_t count_inversions(std::vector<double>& v)
{
    std::vector<double> buf(v.size());
    std::size_t swaps = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    swaps += mid - i;
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid)
                buf[k++] = v[i++];
            while (j < hi)
                buf[k++] = v[j++];
        }
        v.swap(buf);
    }
    return swaps;
}

// Sum over runs of equal values of t(t-1)/2; `v` must be sorted.
std::size_t tied_pairs(std::span<const double> v)
{
    std::size_t total = 0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i])
            ++j;
        total += (j - i) * (j - i - 1) / 2;
        i = j;
    }
    return total;
}

} // namespace

MeanVar mean_variance(std::span<const double> values)
{
    if (values.empty())
        throw InvalidArgument("mean of empty sample");
    MeanVar mv;
    mv.n = values.size();
    const double n = static_cast<double>(mv.n);
    mv.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mv.mean) * (v - mv.mean);
    mv.variance = ss / n;
    return mv;
}

double tolerant_match(std::span<const int> a, std::span<const int> b, int tolerance)
{
    check_pair(a.size(), b.size(), 1);
    if (tolerance < 0)
        throw InvalidArgument("tolerance must be non-negative");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) <= tolerance)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(a.size());
}

double weighted_kappa(std::span<const int> a, std::span<const int> b, KappaWeighting weighting)
{
    constexpr int K = 5;
    check_pair(a.size(), b.size(), 1);
    std::array<std::array<double, K>, K> observed{};
    std::array<double, K> row{}, col{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 1 || a[i] > K || b[i] < 1 || b[i] > K)
            throw InvalidArgument("ratings must be in 1..5");
        observed[a[i] - 1][b[i] - 1] += 1.0;
        row[a[i] - 1] += 1.0;
        col[b[i] - 1] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double obs = 0.0, exp = 0.0;
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const double d = std::abs(i - j) / static_cast<double>(K - 1);
            const double w = weighting == KappaWeighting::linear ? d : d * d;
            obs += w * observed[i][j] / n;
            exp += w * row[i] * col[j] / (n * n);
        }
    if (exp == 0.0)
        throw Error("undefined kappa");
    return 1.0 - obs / exp;
}

std::vector<double> average_ranks(std::span<const double> x)
{
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && x[order[j]] == x[order[i]])
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    check_pair(x.size(), y.size(), 2);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw InvalidArgument("correlation undefined for a constant vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y)
{
    check_pair(x.size(), y.size(), 2);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y)
{
    check_pair(x.size(), y.size(), 2);
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return x[i] != x[j] ? x[i] < x[j] : y[i] < y[j];
    });

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const std::size_t n0 = n * (n - 1) / 2;
    const std::size_t n1 = tied_pairs(xs);

    // pairs tied on both x and y
    std::size_t n3 = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i])
            ++j;
        n3 += (j - i) * (j - i - 1) / 2;
        i = j;
    }

    const std::size_t swaps = count_inversions(ys); // ys is now sorted
    const std::size_t n2 = tied_pairs(ys);

    const double denom = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
    if (denom == 0.0)
        throw InvalidArgument("tau-b undefined for a constant vector");
    const double concordant_minus_discordant = static_cast<double>(n0) - static_cast<double>(n1) -
                                               static_cast<double>(n2) + static_cast<double>(n3) -
                                               2.0 * static_cast<double>(swaps);
    return std::clamp(concordant_minus_discordant / denom, -1.0, 1.0);
}

Correlations correlations(std::span<const double> x, std::span<const double> y)
{
    check_pair(x.size(), y.size(), 3);
    Correlations c;
    auto attempt = [&](std::optional<double>& slot, const char* name, auto&& fn) {
        try {
            slot = fn(x, y);
        } catch (const Error& e) {
            c.errors.push_back(std::string(name) + ": " + e.what());
        }
    };
    attempt(c.pearson, "pearson", [](auto a, auto b) { return pearson(a, b); });
    attempt(c.spearman, "spearman", [](auto a, auto b) { return spearman(a, b); });
    attempt(c.kendall, "kendall", [](auto a, auto b) { return kendall_tau_b(a, b); });
    return c;
}

} // namespace litctl

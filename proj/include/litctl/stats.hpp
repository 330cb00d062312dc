#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace litctl {

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0; // population (divide by N)
    std::size_t n = 0;
};

/// Throws InvalidArgument on empty input.
MeanVar mean_variance(std::span<const double> values);

/// Fraction of pairs with |a - b| <= tolerance.
double tolerant_match(std::span<const int> a, std::span<const int> b, int tolerance = 1);

enum class KappaWeighting { linear, quadratic };

/// Weighted Cohen's kappa over categories 1..5 from the 5x5 confusion matrix.
/// Throws Error("undefined kappa") when expected disagreement is zero.
double weighted_kappa(std::span<const int> a, std::span<const int> b,
                      KappaWeighting weighting = KappaWeighting::linear);

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b with tie correction, O(n log n).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Each coefficient is computed independently; a failing one leaves its
/// value empty and records the reason.
struct Correlations {
    std::optional<double> pearson;
    std::optional<double> spearman;
    std::optional<double> kendall;
    std::vector<std::string> errors;
};

/// Throws InvalidArgument on length mismatch or fewer than 3 points.
Correlations correlations(std::span<const double> x, std::span<const double> y);

} // namespace litctl

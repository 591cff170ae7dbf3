#pragma once

#include <cstddef>
#include <span>

namespace gpc {

struct GofResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t m = 0;
    // The p-value always comes from the asymptotic law; below m = 10 it is a
    // rough guide only and this flag says so.
    bool low_sample = false;
};

// Kolmogorov-Smirnov test of uniformity on [0,1]. The p-value evaluates the
// asymptotic Kolmogorov distribution at sqrt(m) * D_m.
GofResult ks_uniform_test(std::span<const double> sample);

// Cramer-von Mises test of uniformity on [0,1]; asymptotic p-value accurate
// to about 1e-3, which the consumers' 50% threshold does not notice.
GofResult cvm_uniform_test(std::span<const double> sample);

// Variants for callers that already hold the sample in ascending order (the
// scan evaluates hundreds of nested prefixes and must not re-sort each one).
GofResult ks_uniform_test_sorted(std::span<const double> sorted_sample);
GofResult cvm_uniform_test_sorted(std::span<const double> sorted_sample);

enum class CiMethod { clopper_pearson, agresti_coull };

struct BinomialCI {
    CiMethod method = CiMethod::clopper_pearson;
    double level = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    std::size_t n = 0;
    std::size_t k = 0;
};

// Two-sided confidence interval for a binomial proportion from k successes in
// n trials. Clopper-Pearson inverts the exact binomial tails through beta
// quantiles; Agresti-Coull is the adjusted Wald interval, clamped to [0,1].
BinomialCI binomial_ci(std::size_t k, std::size_t n, double level, CiMethod method);

} // namespace gpc

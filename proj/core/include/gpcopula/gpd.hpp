#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpc {

// Univariate generalized Pareto family indexed by alpha:
//   alpha > 0  support [-1, 0],  cdf 1 - (-x)^alpha
//   alpha = 0  support [0, inf), cdf 1 - exp(-x)
//   alpha < 0  support [1, inf), cdf 1 - x^alpha
struct GpdShapeAlpha {
    double alpha = 0.0;

    double support_lower() const noexcept {
        if (alpha > 0.0) return -1.0;
        if (alpha < 0.0) return 1.0;
        return 0.0;
    }
    double support_upper() const noexcept {
        return alpha > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
};

// Distribution function of H_alpha; values outside the support clamp to 0/1.
double gpd_cdf_alpha(double alpha, double x);

// Inverse of H_alpha on (0,1).
double gpd_quantile_alpha(double alpha, double u);

// Threshold-excess parametrization: distribution of the excess over a
// threshold, cdf 1 - (1 + xi w / sigma)^(-1/xi) on w >= 0 (upper endpoint
// -sigma/xi when xi < 0). |xi| < 1e-6 switches to the exponential branch.
double gpd_excess_cdf(double sigma, double xi, double w);
double gpd_excess_quantile(double sigma, double xi, double u);

// Log-likelihood of iid excesses; -infinity outside the feasible region
// {sigma > 0, 1 + xi z_i / sigma > 0 for all i}.
double gpd_log_likelihood(double sigma, double xi, std::span<const double> excesses);

// Asymptotic covariance of the maximum likelihood estimator for k excesses,
// (1+xi)/k * [[2 sigma^2, sigma], [sigma, 1+xi]]; meaningful for xi > -0.5.
std::array<double, 4> gpd_asymptotic_covariance(double sigma, double xi, std::size_t k);

struct GpdFitResult {
    double sigma = 0.0;
    double xi = 0.0;
    std::array<double, 4> covariance{};  // row-major (sigma, xi) order
    bool covariance_valid = false;       // xi > -0.5
    double log_likelihood = 0.0;
    std::size_t iterations = 0;
};

// Raised when the optimizer exhausts its iteration budget or the sample is
// degenerate; carries the last iterate so callers can inspect it.
class FitConvergenceError : public std::runtime_error {
public:
    FitConvergenceError(const std::string& what, double sigma, double xi)
        : std::runtime_error(what), last_sigma(sigma), last_xi(xi) {}
    double last_sigma;
    double last_xi;
};

// Maximum likelihood fit of (sigma, xi) to threshold excesses (all > 0,
// at least 10 of them). Nelder-Mead on (ln sigma, xi); optional explicit
// starting point, moment-based otherwise.
GpdFitResult fit_gpd_mle(std::span<const double> excesses,
    std::optional<std::pair<double, double>> init = std::nullopt);

struct EmpiricalExceedance {
    std::size_t n_exceed = 0;
    std::size_t n_total = 0;
    double eep = 0.0;     // n_exceed / n_total
    double se_eep = 0.0;  // binomial standard error
};

// Counts strict exceedances of the threshold.
EmpiricalExceedance empirical_exceedance(std::span<const double> data, double threshold);

// One fitted margin: empirical exceedance of the threshold s glued to a GPD
// tail above it, evaluated at a target level y >= s.
struct GpdMarginFit {
    std::string label;  // column / series name, carried into reports
    double threshold_s = 0.0;
    double target_y = 0.0;
    std::size_t n_total = 0;
    std::size_t n_exceed = 0;
    double eep = 0.0;
    double se_eep = 0.0;
    double sigma = 0.0;
    double xi = 0.0;
    double se_sigma = 0.0;
    double se_xi = 0.0;
    std::array<double, 4> covariance{};
    bool covariance_valid = false;
    double p0 = 0.0;     // P(X <= target_y), pieced together
    double se_p0 = 0.0;

    nlohmann::json to_json() const;
    static GpdMarginFit from_json(const nlohmann::json& j);
};

struct PiecedProbability {
    double p0 = 0.0;
    double se_p0 = 0.0;
};

// P(X <= y) = 1 - eep * (1 + xi (y - s)/sigma)^(-1/xi) with the delta-method
// standard error propagated from (se_eep, covariance of (sigma, xi)).
// Requires target_y >= threshold_s. A target beyond the upper endpoint of a
// xi < 0 tail yields p0 = 1 exactly.
PiecedProbability piecing_together_p0(const GpdMarginFit& fit);

// Fits a margin end to end: exceedance counting, tail MLE, pieced probability.
GpdMarginFit fit_margin(std::span<const double> data, double threshold_s, double target_y,
    std::string label = {}, std::optional<std::pair<double, double>> init = std::nullopt);

// Per-threshold summaries backing manual threshold choice: exceedance counts,
// mean excess, and refitted tail parameters where enough data remains.
struct ThresholdDiagnosticsRow {
    double threshold = 0.0;
    std::size_t n_exceed = 0;
    double mean_excess = 0.0;
    double sigma = 0.0;
    double xi = 0.0;
    bool fit_ok = false;
};

std::vector<ThresholdDiagnosticsRow> threshold_diagnostics(
    std::span<const double> data, std::span<const double> thresholds);

} // namespace gpc

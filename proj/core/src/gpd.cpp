#include "gpcopula/gpd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace gpc {

namespace {

constexpr double kXiZeroBand = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

double gpd_cdf_alpha(double alpha, double x) {
    if (std::isnan(x)) return x;
    if (alpha > 0.0) {
        if (x >= 0.0) return 1.0;
        if (x <= -1.0) return 0.0;
        return 1.0 - std::pow(-x, alpha);
    }
    if (alpha < 0.0) {
        if (x <= 1.0) return 0.0;
        return 1.0 - std::pow(x, alpha);
    }
    if (x <= 0.0) return 0.0;
    return 1.0 - std::exp(-x);
}

double gpd_quantile_alpha(double alpha, double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::domain_error("gpd_quantile_alpha: requires u in (0,1)");
    }
    if (alpha > 0.0) return -std::pow(1.0 - u, 1.0 / alpha);
    if (alpha < 0.0) return std::pow(1.0 - u, 1.0 / alpha);
    return -std::log1p(-u);
}

double gpd_excess_cdf(double sigma, double xi, double w) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gpd_excess_cdf: requires sigma > 0");
    if (std::isnan(w)) return w;
    if (w <= 0.0) return 0.0;
    if (std::fabs(xi) < kXiZeroBand) {
        return 1.0 - std::exp(-w / sigma);
    }
    const double a = 1.0 + xi * w / sigma;
    if (a <= 0.0) return 1.0;  // beyond the upper endpoint of a xi < 0 tail
    return 1.0 - std::pow(a, -1.0 / xi);
}

double gpd_excess_quantile(double sigma, double xi, double u) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gpd_excess_quantile: requires sigma > 0");
    if (!(u > 0.0 && u < 1.0)) {
        throw std::domain_error("gpd_excess_quantile: requires u in (0,1)");
    }
    if (std::fabs(xi) < kXiZeroBand) {
        return -sigma * std::log1p(-u);
    }
    return sigma / xi * (std::pow(1.0 - u, -xi) - 1.0);
}

double gpd_log_likelihood(double sigma, double xi, std::span<const double> excesses) {
    if (!(sigma > 0.0)) return -kInf;
    const double log_sigma = std::log(sigma);
    double ll = 0.0;
    if (std::fabs(xi) < kXiZeroBand) {
        for (double z : excesses) {
            if (!(z > 0.0)) return -kInf;
            ll += -log_sigma - z / sigma;
        }
        return ll;
    }
    const double c = 1.0 + 1.0 / xi;
    for (double z : excesses) {
        if (!(z > 0.0)) return -kInf;
        const double a = 1.0 + xi * z / sigma;
        if (a <= 0.0) return -kInf;
        ll += -log_sigma - c * std::log(a);
    }
    return ll;
}

std::array<double, 4> gpd_asymptotic_covariance(double sigma, double xi, std::size_t k) {
    if (!(sigma > 0.0) || k == 0) {
        throw std::invalid_argument("gpd_asymptotic_covariance: requires sigma > 0 and k > 0");
    }
    const double f = (1.0 + xi) / static_cast<double>(k);
    return {f * 2.0 * sigma * sigma, f * sigma, f * sigma, f * (1.0 + xi)};
}

namespace {

struct Vertex {
    double log_sigma;
    double xi;
    double value;
};

// Negative log-likelihood over (ln sigma, xi) with a smooth penalty pushing
// iterates back into {1 + xi z_i / sigma > 0}.
double nm_objective(double log_sigma, double xi, std::span<const double> excesses) {
    const double sigma = std::exp(log_sigma);
    double worst = 0.0;
    for (double z : excesses) {
        const double a = 1.0 + xi * z / sigma;
        if (a <= 0.0) worst = std::max(worst, -a);
    }
    if (worst > 0.0) {
        return 1e10 * (1.0 + worst);
    }
    return -gpd_log_likelihood(sigma, xi, excesses);
}

} // namespace

GpdFitResult fit_gpd_mle(std::span<const double> excesses,
    std::optional<std::pair<double, double>> init) {
    if (excesses.size() < 10) {
        throw std::invalid_argument("fit_gpd_mle: requires at least 10 excesses");
    }
    double mean = 0.0;
    for (double z : excesses) {
        if (!(z > 0.0)) {
            throw std::invalid_argument("fit_gpd_mle: excesses must be strictly positive");
        }
        mean += z;
    }
    const double n = static_cast<double>(excesses.size());
    mean /= n;
    double var = 0.0;
    for (double z : excesses) var += (z - mean) * (z - mean);
    var /= (n - 1.0);
    if (!(var > 0.0)) {
        throw FitConvergenceError(
            "fit_gpd_mle: excesses have zero variance; likelihood is maximized on the "
            "boundary xi -> -1",
            mean, -1.0);
    }

    double sigma0;
    double xi0;
    if (init) {
        sigma0 = init->first;
        xi0 = init->second;
        if (!(sigma0 > 0.0)) {
            throw std::invalid_argument("fit_gpd_mle: initial sigma must be > 0");
        }
    } else {
        // Moment estimators; well-defined since var > 0.
        const double ratio = mean * mean / var;
        xi0 = 0.5 * (1.0 - ratio);
        sigma0 = 0.5 * mean * (ratio + 1.0);
    }

    // Nelder-Mead with the standard reflection/expansion/contraction/shrink
    // coefficients (1, 2, 0.5, 0.5).
    std::array<Vertex, 3> simplex;
    const double ls0 = std::log(sigma0);
    simplex[0] = {ls0, xi0, nm_objective(ls0, xi0, excesses)};
    simplex[1] = {ls0 + 0.1, xi0, nm_objective(ls0 + 0.1, xi0, excesses)};
    simplex[2] = {ls0, xi0 + 0.1, nm_objective(ls0, xi0 + 0.1, excesses)};

    constexpr std::size_t kMaxIterations = 2000;
    constexpr double kTol = 1e-8;
    std::size_t iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        std::sort(simplex.begin(), simplex.end(),
            [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
        if (simplex[2].value - simplex[0].value < kTol) break;

        const double cls = 0.5 * (simplex[0].log_sigma + simplex[1].log_sigma);
        const double cxi = 0.5 * (simplex[0].xi + simplex[1].xi);

        const double rls = cls + (cls - simplex[2].log_sigma);
        const double rxi = cxi + (cxi - simplex[2].xi);
        const double rv = nm_objective(rls, rxi, excesses);

        if (rv < simplex[0].value) {
            const double els = cls + 2.0 * (cls - simplex[2].log_sigma);
            const double exi = cxi + 2.0 * (cxi - simplex[2].xi);
            const double ev = nm_objective(els, exi, excesses);
            simplex[2] = ev < rv ? Vertex{els, exi, ev} : Vertex{rls, rxi, rv};
            continue;
        }
        if (rv < simplex[1].value) {
            simplex[2] = {rls, rxi, rv};
            continue;
        }
        const bool outside = rv < simplex[2].value;
        const double bls = outside ? rls : simplex[2].log_sigma;
        const double bxi = outside ? rxi : simplex[2].xi;
        const double kls = cls + 0.5 * (bls - cls);
        const double kxi = cxi + 0.5 * (bxi - cxi);
        const double kv = nm_objective(kls, kxi, excesses);
        if (kv < std::min(rv, simplex[2].value)) {
            simplex[2] = {kls, kxi, kv};
            continue;
        }
        for (int i = 1; i < 3; ++i) {
            simplex[i].log_sigma = simplex[0].log_sigma
                + 0.5 * (simplex[i].log_sigma - simplex[0].log_sigma);
            simplex[i].xi = simplex[0].xi + 0.5 * (simplex[i].xi - simplex[0].xi);
            simplex[i].value = nm_objective(simplex[i].log_sigma, simplex[i].xi, excesses);
        }
    }
    std::sort(simplex.begin(), simplex.end(),
        [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
    const double sigma_hat = std::exp(simplex[0].log_sigma);
    const double xi_hat = simplex[0].xi;
    if (iter >= kMaxIterations) {
        throw FitConvergenceError(
            "fit_gpd_mle: no convergence within 2000 iterations", sigma_hat, xi_hat);
    }
    if (simplex[0].value >= 1e10) {
        throw FitConvergenceError(
            "fit_gpd_mle: optimizer stuck outside the feasible region", sigma_hat, xi_hat);
    }

    GpdFitResult result;
    result.sigma = sigma_hat;
    result.xi = xi_hat;
    result.covariance_valid = xi_hat > -0.5;
    if (result.covariance_valid) {
        result.covariance = gpd_asymptotic_covariance(sigma_hat, xi_hat, excesses.size());
    } else {
        result.covariance = {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN()};
    }
    result.log_likelihood = -simplex[0].value;
    result.iterations = iter;
    return result;
}

EmpiricalExceedance empirical_exceedance(std::span<const double> data, double threshold) {
    if (data.empty()) {
        throw std::invalid_argument("empirical_exceedance: data must be nonempty");
    }
    EmpiricalExceedance out;
    out.n_total = data.size();
    for (double x : data) {
        if (x > threshold) ++out.n_exceed;
    }
    const double n = static_cast<double>(out.n_total);
    out.eep = static_cast<double>(out.n_exceed) / n;
    out.se_eep = std::sqrt(out.eep * (1.0 - out.eep) / n);
    return out;
}

PiecedProbability piecing_together_p0(const GpdMarginFit& fit) {
    if (!(fit.sigma > 0.0)) {
        throw std::invalid_argument("piecing_together_p0: requires sigma > 0");
    }
    if (!(fit.eep >= 0.0 && fit.eep <= 1.0)) {
        throw std::invalid_argument("piecing_together_p0: eep must lie in [0,1]");
    }
    const double w = fit.target_y - fit.threshold_s;
    if (!(w >= 0.0)) {
        throw std::domain_error("piecing_together_p0: target_y must be >= threshold_s");
    }

    double g;       // conditional survival of the excess at w
    double dg_ds;   // d g / d sigma
    double dg_dxi;  // d g / d xi
    const double sigma = fit.sigma;
    const double xi = fit.xi;
    if (std::fabs(xi) < kXiZeroBand) {
        g = std::exp(-w / sigma);
        dg_ds = g * w / (sigma * sigma);
        dg_dxi = g * w * w / (2.0 * sigma * sigma);
    } else {
        const double a = 1.0 + xi * w / sigma;
        if (a <= 0.0) {
            // Target beyond the upper endpoint: the tail puts no mass there.
            return {1.0, 0.0};
        }
        g = std::pow(a, -1.0 / xi);
        dg_ds = g * w / (sigma * sigma * a);
        dg_dxi = g * (std::log(a) / (xi * xi) - w / (xi * sigma * a));
    }

    double variance = g * g * fit.se_eep * fit.se_eep;
    double se;
    if (fit.covariance_valid) {
        const auto& c = fit.covariance;
        variance += fit.eep * fit.eep
            * (dg_ds * dg_ds * c[0] + 2.0 * dg_ds * dg_dxi * c[1] + dg_dxi * dg_dxi * c[3]);
        se = std::sqrt(std::max(variance, 0.0));
    } else {
        // Parameter uncertainty unavailable; the propagated error is unknown.
        se = std::numeric_limits<double>::quiet_NaN();
    }
    return {1.0 - fit.eep * g, se};
}

GpdMarginFit fit_margin(std::span<const double> data, double threshold_s, double target_y,
    std::string label, std::optional<std::pair<double, double>> init) {
    if (!(target_y >= threshold_s)) {
        throw std::domain_error("fit_margin: target_y must be >= threshold_s");
    }
    GpdMarginFit fit;
    fit.label = std::move(label);
    fit.threshold_s = threshold_s;
    fit.target_y = target_y;

    const EmpiricalExceedance exc = empirical_exceedance(data, threshold_s);
    fit.n_total = exc.n_total;
    fit.n_exceed = exc.n_exceed;
    fit.eep = exc.eep;
    fit.se_eep = exc.se_eep;

    std::vector<double> excesses;
    excesses.reserve(exc.n_exceed);
    for (double x : data) {
        if (x > threshold_s) excesses.push_back(x - threshold_s);
    }
    const GpdFitResult tail = fit_gpd_mle(excesses, init);
    fit.sigma = tail.sigma;
    fit.xi = tail.xi;
    fit.covariance = tail.covariance;
    fit.covariance_valid = tail.covariance_valid;
    fit.se_sigma = tail.covariance_valid ? std::sqrt(tail.covariance[0])
                                         : std::numeric_limits<double>::quiet_NaN();
    fit.se_xi = tail.covariance_valid ? std::sqrt(tail.covariance[3])
                                      : std::numeric_limits<double>::quiet_NaN();

    const PiecedProbability pieced = piecing_together_p0(fit);
    fit.p0 = pieced.p0;
    fit.se_p0 = pieced.se_p0;
    return fit;
}

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double number_or_nan(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) {
        throw std::invalid_argument(std::string("GpdMarginFit: field '") + key
            + "' must be a number or null");
    }
    return v.get<double>();
}

} // namespace

nlohmann::json GpdMarginFit::to_json() const {
    nlohmann::json j;
    j["pollutant"] = label;
    j["n"] = n_total;
    j["s"] = threshold_s;
    j["target_y"] = target_y;
    j["NE"] = n_exceed;
    j["EEP"] = eep;
    j["sigma"] = sigma;
    j["xi"] = xi;
    j["p0"] = p0;
    j["se"] = {
        {"EEP", finite_or_null(se_eep)},
        {"sigma", finite_or_null(se_sigma)},
        {"xi", finite_or_null(se_xi)},
        {"p0", finite_or_null(se_p0)},
    };
    if (covariance_valid) {
        j["covariance"] = {{covariance[0], covariance[1]}, {covariance[2], covariance[3]}};
    } else {
        j["covariance"] = nullptr;
    }
    return j;
}

GpdMarginFit GpdMarginFit::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("GpdMarginFit: expected a JSON object");
    }
    GpdMarginFit fit;
    fit.label = j.at("pollutant").get<std::string>();
    fit.n_total = j.at("n").get<std::size_t>();
    fit.threshold_s = j.at("s").get<double>();
    fit.target_y = j.at("target_y").get<double>();
    fit.n_exceed = j.at("NE").get<std::size_t>();
    fit.eep = j.at("EEP").get<double>();
    fit.sigma = j.at("sigma").get<double>();
    fit.xi = j.at("xi").get<double>();
    fit.p0 = j.at("p0").get<double>();
    const auto& se = j.at("se");
    fit.se_eep = number_or_nan(se, "EEP");
    fit.se_sigma = number_or_nan(se, "sigma");
    fit.se_xi = number_or_nan(se, "xi");
    fit.se_p0 = number_or_nan(se, "p0");
    const auto& cov = j.at("covariance");
    if (cov.is_null()) {
        fit.covariance_valid = false;
        fit.covariance = {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN()};
    } else {
        if (!cov.is_array() || cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2) {
            throw std::invalid_argument("GpdMarginFit: covariance must be a 2x2 array or null");
        }
        fit.covariance_valid = true;
        fit.covariance = {cov[0][0].get<double>(), cov[0][1].get<double>(),
            cov[1][0].get<double>(), cov[1][1].get<double>()};
    }
    return fit;
}

std::vector<ThresholdDiagnosticsRow> threshold_diagnostics(
    std::span<const double> data, std::span<const double> thresholds) {
    if (data.empty()) {
        throw std::invalid_argument("threshold_diagnostics: data must be nonempty");
    }
    std::vector<ThresholdDiagnosticsRow> rows;
    rows.reserve(thresholds.size());
    for (double s : thresholds) {
        ThresholdDiagnosticsRow row;
        row.threshold = s;
        std::vector<double> excesses;
        for (double x : data) {
            if (x > s) excesses.push_back(x - s);
        }
        row.n_exceed = excesses.size();
        if (!excesses.empty()) {
            double sum = 0.0;
            for (double z : excesses) sum += z;
            row.mean_excess = sum / static_cast<double>(excesses.size());
        }
        if (excesses.size() >= 10) {
            try {
                const GpdFitResult fit = fit_gpd_mle(excesses);
                row.sigma = fit.sigma;
                row.xi = fit.xi;
                row.fit_ok = true;
            } catch (const FitConvergenceError&) {
                row.fit_ok = false;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace gpc

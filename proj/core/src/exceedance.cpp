#include "gpcopula/exceedance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace gpc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Rescaled row maxima B_i = max_j((1 - U_ij)/(1 - x0_j)); with u(t) =
// (1 - x0)/t this makes M_i(t) = t * B_i, so one pass over the sample serves
// every grid point.
std::vector<double> row_maxima(const Matrix& pseudo, const std::vector<double>& x0) {
    const std::size_t n = pseudo.rows();
    const std::size_t d = pseudo.cols();
    std::vector<double> weights(d);
    for (std::size_t j = 0; j < d; ++j) weights[j] = 1.0 - x0[j];
    std::vector<double> maxima(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = pseudo.row(i);
        double b = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            b = std::max(b, (1.0 - row[j]) / weights[j]);
        }
        maxima[i] = b;
    }
    return maxima;
}

BinomialCI scaled_ci(double t, std::size_t k, std::size_t n, double level,
                     CiMethod method) {
    BinomialCI ci = binomial_ci(k, n, level, method);
    ci.lower *= t;
    ci.upper *= t;
    return ci;
}

void append_field(std::string& line, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
}

} // namespace

std::vector<double> geometric_grid(double t_low, std::size_t size) {
    if (!(t_low > 0.0) || !(t_low < 1.0)) {
        throw std::invalid_argument("geometric_grid: t_low must lie in (0, 1)");
    }
    if (size < 2) {
        throw std::invalid_argument("geometric_grid: need at least 2 points");
    }
    std::vector<double> grid(size);
    const double log_low = std::log(t_low);
    const auto steps = static_cast<double>(size - 1);
    for (std::size_t k = 0; k < size; ++k) {
        grid[k] = std::exp(log_low * (steps - static_cast<double>(k)) / steps);
    }
    grid.front() = t_low;
    grid.back() = 1.0;
    return grid;
}

double CopulaTarget::t_low() const {
    double low = 0.0;
    for (double v : x0) low = std::max(low, 1.0 - v);
    return low;
}

void CopulaTarget::validate() const {
    if (x0.empty()) {
        throw std::invalid_argument("CopulaTarget: x0 is empty");
    }
    for (std::size_t j = 0; j < x0.size(); ++j) {
        if (x0[j] >= 1.0) {
            throw std::invalid_argument(
                "CopulaTarget: coordinate " + std::to_string(j + 1)
                + " is degenerate (x0 = 1 leaves no exceedance region in that "
                  "margin); drop that margin and rerun");
        }
        if (!(x0[j] > 0.0)) {
            throw std::invalid_argument(
                "CopulaTarget: x0 components must lie in (0, 1)");
        }
    }
    if (!(level > 0.0) || !(level < 1.0)) {
        throw std::invalid_argument("CopulaTarget: level must lie in (0, 1)");
    }
    if (!(p_min > 0.0) || !(p_min < 1.0)) {
        throw std::invalid_argument("CopulaTarget: p_min must lie in (0, 1)");
    }
    if (t_grid.empty()) {
        throw std::invalid_argument("CopulaTarget: t_grid is empty");
    }
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > t_grid[k - 1])) {
            throw std::invalid_argument("CopulaTarget: t_grid must be strictly increasing");
        }
    }
    const double low = t_low();
    if (t_grid.front() < low * (1.0 - 1e-12)) {
        throw std::invalid_argument(
            "CopulaTarget: t_grid starts below t_low = max_j(1 - x0_j)");
    }
    if (t_grid.back() > 1.0 + 1e-12) {
        throw std::invalid_argument("CopulaTarget: t_grid must not exceed 1");
    }
}

CopulaTarget make_copula_target(std::vector<double> x0, double level, double p_min,
                                std::size_t grid_size) {
    CopulaTarget target;
    target.x0 = std::move(x0);
    target.level = level;
    target.p_min = p_min;
    target.t_grid = {1.0};
    target.validate();  // reject bad x0/level before building the grid
    target.t_grid = geometric_grid(target.t_low(), grid_size);
    return target;
}

PseudoSample to_pseudo_sample(const Matrix& raw) {
    if (raw.rows() < 2) {
        throw std::invalid_argument("to_pseudo_sample: need at least 2 rows");
    }
    PseudoSample sample;
    sample.matrix = rank_transform_columns(raw);
    sample.provenance = PseudoProvenance::rank_transform;
    sample.exact_gpc = false;
    return sample;
}

std::vector<ScanRow> conditional_uniformity_scan(const PseudoSample& sample,
                                                 const CopulaTarget& target,
                                                 CiMethod ci_method) {
    target.validate();
    const std::size_t n = sample.matrix.rows();
    const std::size_t d = sample.matrix.cols();
    if (n < 1) {
        throw std::invalid_argument("conditional_uniformity_scan: sample is empty");
    }
    if (d != target.x0.size()) {
        throw std::invalid_argument(
            "conditional_uniformity_scan: sample and x0 dimensions differ");
    }
    std::vector<double> maxima = row_maxima(sample.matrix, target.x0);
    std::sort(maxima.begin(), maxima.end());

    std::vector<ScanRow> scan;
    scan.reserve(target.t_grid.size());
    std::vector<double> retained;
    for (double t : target.t_grid) {
        ScanRow row;
        row.t = t;
        const double cutoff = 1.0 / t;
        const auto k = static_cast<std::size_t>(
            std::upper_bound(maxima.begin(), maxima.end(), cutoff) - maxima.begin());
        row.m = k;
        row.testable = k >= kScanMinRetained;
        if (k == 0) {
            row.p_ks = kNan;
            row.p_cvm = kNan;
            row.min_p = kNan;
        } else {
            retained.resize(k);
            for (std::size_t i = 0; i < k; ++i) {
                retained[i] = std::min(1.0, t * maxima[i]);
            }
            row.p_ks = ks_uniform_test_sorted(retained).p_value;
            row.p_cvm = cvm_uniform_test_sorted(retained).p_value;
            row.min_p = std::min(row.p_ks, row.p_cvm);
        }
        row.p_hat = static_cast<double>(k) / static_cast<double>(n);
        row.q_hat = t * row.p_hat;
        row.ci = scaled_ci(t, k, n, target.level, ci_method);
        scan.push_back(std::move(row));
    }
    return scan;
}

ThresholdSelection select_t0(const std::vector<ScanRow>& scan, double p_min) {
    if (scan.empty()) {
        throw std::invalid_argument("select_t0: scan is empty");
    }
    bool any_testable = false;
    std::size_t best = 0;
    double best_p = -1.0;
    for (std::size_t k = 0; k < scan.size(); ++k) {
        const ScanRow& row = scan[k];
        if (!row.testable) continue;
        if (row.min_p >= p_min) {
            return {k, row.t, false};
        }
        any_testable = true;
        if (row.min_p > best_p) {
            best_p = row.min_p;
            best = k;
        }
    }
    if (!any_testable) {
        throw ScanSelectionError(
            "select_t0: no grid point retains enough observations ("
            + std::to_string(kScanMinRetained) + ") to apply the p-value rule");
    }
    return {best, scan[best].t, true};
}

ExceedanceEstimate estimate_exceedance(const PseudoSample& sample,
                                       const CopulaTarget& target,
                                       CiMethod ci_method) {
    std::vector<ScanRow> scan = conditional_uniformity_scan(sample, target, ci_method);
    ExceedanceEstimate estimate;
    try {
        const ThresholdSelection sel = select_t0(scan, target.p_min);
        const ScanRow& row = scan[sel.index];
        estimate.t0 = sel.t0;
        estimate.m_at_t0 = row.m;
        estimate.p_hat = row.p_hat;
        estimate.q_hat = sel.t0 * row.p_hat;
        estimate.ci = row.ci;
        estimate.fallback_used = sel.fallback_used;
        estimate.scan = std::move(scan);
        return estimate;
    } catch (const ScanSelectionError&) {
        const double lowest = *std::min_element(target.x0.begin(), target.x0.end());
        const double highest = *std::max_element(target.x0.begin(), target.x0.end());
        if (lowest == highest) {
            throw;  // already symmetric, nothing new to try
        }
        CopulaTarget symmetrized_target = target;
        symmetrized_target.x0.assign(target.x0.size(), lowest);
        // Same t_low (max_j(1 - x0_j) is preserved), so the grid stays valid.
        ExceedanceEstimate symmetrized =
            estimate_exceedance(sample, symmetrized_target, ci_method);

        const double t0 = symmetrized.t0;
        const std::vector<double> maxima = row_maxima(sample.matrix, target.x0);
        const double cutoff = 1.0 / t0;
        std::size_t k = 0;
        for (double b : maxima) {
            if (b <= cutoff) ++k;
        }
        const std::size_t n = sample.matrix.rows();
        estimate.t0 = t0;
        estimate.m_at_t0 = k;
        estimate.p_hat = static_cast<double>(k) / static_cast<double>(n);
        estimate.q_hat = t0 * estimate.p_hat;
        estimate.ci = scaled_ci(t0, k, n, target.level, ci_method);
        estimate.fallback_used = true;
        estimate.scan = std::move(scan);
        estimate.symmetrized =
            std::make_shared<const ExceedanceEstimate>(std::move(symmetrized));
        return estimate;
    }
}

double fragility_index(const DNormHandle& dnorm, double t, const std::vector<double>& u) {
    if (!(t >= 0.0) || !(t <= 1.0)) {
        throw std::invalid_argument("fragility_index: t must lie in [0, 1]");
    }
    if (u.empty()) {
        throw std::invalid_argument("fragility_index: u is empty");
    }
    double l1 = 0.0;
    bool any_positive = false;
    for (double v : u) {
        if (!(v >= 0.0)) {
            throw std::invalid_argument("fragility_index: u must be nonnegative");
        }
        if (v > 0.0) any_positive = true;
        l1 += v;
    }
    if (!any_positive) {
        throw std::domain_error("fragility_index: undefined at the zero vector");
    }
    const double norm = eval_dnorm(dnorm, u);
    if (!(norm > 0.0)) {
        throw std::domain_error("fragility_index: norm of u evaluated to zero");
    }
    return t * l1 / norm;
}

void write_scan_csv(const std::vector<ScanRow>& scan, std::ostream& out) {
    out << "t,m,p_ks,p_cvm,min_p,p_hat,q_hat,ci_lo,ci_hi\n";
    std::string line;
    for (const ScanRow& row : scan) {
        line.clear();
        append_field(line, row.t);
        line.push_back(',');
        line.append(std::to_string(row.m));
        line.push_back(',');
        append_field(line, row.p_ks);
        line.push_back(',');
        append_field(line, row.p_cvm);
        line.push_back(',');
        append_field(line, row.min_p);
        line.push_back(',');
        append_field(line, row.p_hat);
        line.push_back(',');
        append_field(line, row.q_hat);
        line.push_back(',');
        append_field(line, row.ci.lower);
        line.push_back(',');
        append_field(line, row.ci.upper);
        line.push_back('\n');
        out << line;
    }
}

} // namespace gpc

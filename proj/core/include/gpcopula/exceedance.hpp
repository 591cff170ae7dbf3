#pragma once

#include "gpcopula/dnorm.hpp"
#include "gpcopula/matrix.hpp"
#include "gpcopula/simulation.hpp"
#include "gpcopula/stat_tests.hpp"

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

namespace gpc {

// Below this many retained observations the goodness-of-fit p-values are not
// trusted for threshold selection.
inline constexpr std::size_t kScanMinRetained = 20;

// Geometrically spaced grid from t_low to 1 inclusive; interesting behavior
// concentrates near t_low, so log spacing puts most points there.
std::vector<double> geometric_grid(double t_low, std::size_t size = 200);

// Copula-scale critical point together with the scan configuration. q is the
// probability that every component exceeds its x0 coordinate jointly.
struct CopulaTarget {
    std::vector<double> x0;      // componentwise critical levels in (0,1)
    double level = 0.95;         // confidence level for binomial intervals
    double p_min = 0.5;          // acceptance floor for min(p_ks, p_cvm)
    std::vector<double> t_grid;  // strictly increasing, inside [t_low(), 1]

    double t_low() const;  // max_j(1 - x0_j), the smallest admissible t

    // Throws std::invalid_argument; a coordinate at 1 gets a dedicated
    // message telling the caller to drop that margin.
    void validate() const;
};

// Builder with the default geometric grid.
CopulaTarget make_copula_target(std::vector<double> x0, double level = 0.95,
                                double p_min = 0.5, std::size_t grid_size = 200);

struct ScanRow {
    double t = 0.0;
    // Retained rows, i.e. rows whose rescaled maximum M_i(t) is <= 1. The
    // same inequality defines the joint exceedance U >= 1 - u(t), so this
    // single count feeds both the tests and p_hat.
    std::size_t m = 0;
    bool testable = false;  // m >= kScanMinRetained
    double p_ks = 0.0;      // NaN when m = 0
    double p_cvm = 0.0;     // NaN when m = 0
    double min_p = 0.0;     // NaN when m = 0
    double p_hat = 0.0;     // m / n
    double q_hat = 0.0;     // t * p_hat
    BinomialCI ci;          // binomial interval for p, scaled by t
};

// Thrown when no scan row has enough retained observations to apply the
// p-value selection rule.
class ScanSelectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExceedanceEstimate {
    double t0 = 0.0;
    std::size_t m_at_t0 = 0;
    double p_hat = 0.0;
    double q_hat = 0.0;  // always exactly t0 * p_hat
    BinomialCI ci;       // binomial interval for p at t0, scaled by t0
    std::vector<ScanRow> scan;
    // True when t0 did not come from the p_min rule: either the argmax
    // fallback over the scan or the symmetrized rerun below.
    bool fallback_used = false;
    // Set when the primary scan had no testable row and the procedure was
    // rerun against the symmetrized critical point (every component set to
    // the smallest x0 coordinate); t0 is borrowed from that run while p_hat
    // still counts exceedances of the original x0.
    std::shared_ptr<const ExceedanceEstimate> symmetrized;
};

// Columnwise ranks over (n+1); provenance = rank_transform. Requires n >= 2.
PseudoSample to_pseudo_sample(const Matrix& raw);

// For each grid t: u(t) = (1 - x0)/t, M_i(t) = max_j((1 - U_ij)/u_j(t)),
// rows with M_i(t) <= 1 are retained and tested for uniformity.
std::vector<ScanRow> conditional_uniformity_scan(
    const PseudoSample& sample, const CopulaTarget& target,
    CiMethod ci_method = CiMethod::clopper_pearson);

struct ThresholdSelection {
    std::size_t index = 0;  // position in the scan
    double t0 = 0.0;
    bool fallback_used = false;
};

// Smallest grid t whose row is testable with min_p >= p_min. When no row
// passes, falls back to the testable row with the largest min_p and flags
// it. Throws ScanSelectionError when no row is testable at all.
ThresholdSelection select_t0(const std::vector<ScanRow>& scan, double p_min);

// Full procedure: scan, select t0, report q_hat = t0 * p_hat with the
// t0-scaled binomial interval. When the primary scan has no testable row the
// procedure is rerun against the symmetrized critical point (see
// ExceedanceEstimate::symmetrized); if even that fails the selection error
// propagates.
ExceedanceEstimate estimate_exceedance(
    const PseudoSample& sample, const CopulaTarget& target,
    CiMethod ci_method = CiMethod::clopper_pearson);

// t * |u|_1 / |u|_D. Requires t in [0,1] and u nonnegative with at least one
// positive component (throws std::domain_error on the zero vector).
double fragility_index(const DNormHandle& dnorm, double t,
                       const std::vector<double>& u);

// Header t,m,p_ks,p_cvm,min_p,p_hat,q_hat,ci_lo,ci_hi; untestable rows carry
// nan in the p-value columns.
void write_scan_csv(const std::vector<ScanRow>& scan, std::ostream& out);

} // namespace gpc

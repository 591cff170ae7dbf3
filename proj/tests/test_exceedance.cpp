#include "gpcopula/exceedance.hpp"

#include "gpcopula/dnorm.hpp"
#include "gpcopula/rng.hpp"
#include "gpcopula/simulation.hpp"
#include "gpcopula/stat_tests.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

gpc::PseudoSample exact_constant_sample(std::size_t dim, std::size_t n, std::uint64_t seed) {
    gpc::GpdSampleConfig config;
    config.spec.family = gpc::GeneratorFamily::constant_one;
    config.spec.dim = dim;
    config.margins = gpc::MarginKind::copula_scale;
    config.n = n;
    config.seed = seed;
    return gpc::simulate_copula_scale(config);
}

gpc::ScanRow synthetic_row(double t, std::size_t m, double min_p) {
    gpc::ScanRow row;
    row.t = t;
    row.m = m;
    row.testable = m >= gpc::kScanMinRetained;
    row.p_ks = min_p;
    row.p_cvm = min_p;
    row.min_p = min_p;
    return row;
}

} // namespace

TEST_CASE("pseudo sample construction follows the average-rank convention") {
    gpc::Matrix raw(3, 2);
    raw(0, 0) = 10.0; raw(1, 0) = 30.0; raw(2, 0) = 20.0;
    raw(0, 1) = 1.0;  raw(1, 1) = 5.0;  raw(2, 1) = 5.0;
    const auto sample = gpc::to_pseudo_sample(raw);
    CHECK(sample.provenance == gpc::PseudoProvenance::rank_transform);
    CHECK_FALSE(sample.exact_gpc);
    CHECK(sample.matrix(0, 0) == doctest::Approx(0.25));
    CHECK(sample.matrix(1, 0) == doctest::Approx(0.75));
    CHECK(sample.matrix(2, 0) == doctest::Approx(0.5));
    CHECK(sample.matrix(1, 1) == doctest::Approx(0.625));
    CHECK(sample.matrix(2, 1) == doctest::Approx(0.625));

    gpc::Matrix tiny(1, 1);
    tiny(0, 0) = 1.0;
    CHECK_THROWS_AS(gpc::to_pseudo_sample(tiny), std::invalid_argument);
}

TEST_CASE("geometric grid spans t_low to one with exact endpoints") {
    const auto grid = gpc::geometric_grid(0.01, 200);
    REQUIRE(grid.size() == 200);
    CHECK(grid.front() == 0.01);
    CHECK(grid.back() == 1.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        CHECK(grid[k] > grid[k - 1]);
    }
    // Log spacing: constant successive ratios.
    const double ratio = grid[1] / grid[0];
    CHECK(grid[100] / grid[99] == doctest::Approx(ratio).epsilon(1e-9));

    CHECK_THROWS_AS(gpc::geometric_grid(0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(gpc::geometric_grid(1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(gpc::geometric_grid(0.5, 1), std::invalid_argument);
}

TEST_CASE("copula target validation pins down the grid and the critical point") {
    auto target = gpc::make_copula_target({0.99, 0.95});
    CHECK(target.t_low() == doctest::Approx(0.05));
    CHECK(target.t_grid.size() == 200);
    CHECK(target.t_grid.front() == doctest::Approx(0.05));
    CHECK(target.t_grid.back() == 1.0);
    CHECK_NOTHROW(target.validate());

    auto degenerate = target;
    degenerate.x0[1] = 1.0;
    CHECK_THROWS_WITH_AS(degenerate.validate(),
                         doctest::Contains("drop that margin"), std::invalid_argument);

    auto below = target;
    below.t_grid.front() = 0.01;  // below t_low = 0.05
    CHECK_THROWS_AS(below.validate(), std::invalid_argument);

    auto beyond = target;
    beyond.t_grid.back() = 1.5;
    CHECK_THROWS_AS(beyond.validate(), std::invalid_argument);

    auto not_sorted = target;
    std::swap(not_sorted.t_grid[3], not_sorted.t_grid[4]);
    CHECK_THROWS_AS(not_sorted.validate(), std::invalid_argument);

    auto bad_level = target;
    bad_level.level = 1.0;
    CHECK_THROWS_AS(bad_level.validate(), std::invalid_argument);

    CHECK_THROWS_AS(gpc::make_copula_target({}), std::invalid_argument);
    CHECK_THROWS_AS(gpc::make_copula_target({0.5, -0.1}), std::invalid_argument);
}

TEST_CASE("scan on an exact sample is uniform, monotone and self-consistent") {
    const std::size_t n = 100000;
    const auto sample = exact_constant_sample(2, n, 4242);
    const auto target = gpc::make_copula_target({0.99, 0.99});
    const auto scan = gpc::conditional_uniformity_scan(sample, target);
    REQUIRE(scan.size() == 200);

    std::size_t healthy = 0;
    std::vector<double> min_ps;
    for (std::size_t k = 0; k < scan.size(); ++k) {
        const auto& row = scan[k];
        CHECK(row.m <= n);
        CHECK(row.testable);  // weakest row has about n * 0.01 = 1000 retained
        CHECK(row.p_hat == static_cast<double>(row.m) / static_cast<double>(n));
        CHECK(row.q_hat == row.t * row.p_hat);
        if (k > 0) {
            CHECK(row.p_hat <= scan[k - 1].p_hat);  // u(t) shrinks as t grows
        }
        const auto raw = gpc::binomial_ci(row.m, n, target.level,
                                          gpc::CiMethod::clopper_pearson);
        CHECK(row.ci.lower == row.t * raw.lower);
        CHECK(row.ci.upper == row.t * raw.upper);
        if (row.min_p >= 0.5) ++healthy;
        min_ps.push_back(row.min_p);
    }
    // The conditional law is exactly uniform here, so min(p_ks, p_cvm) is a
    // healthy draw at every t; with two correlated tests the fraction above
    // one half hovers near 0.4 and the median stays well off zero.
    CHECK(static_cast<double>(healthy) / static_cast<double>(scan.size()) >= 0.25);
    std::nth_element(min_ps.begin(), min_ps.begin() + min_ps.size() / 2, min_ps.end());
    CHECK(min_ps[min_ps.size() / 2] >= 0.2);

    // Count at the right grid end recomputed straight from the definition.
    std::size_t direct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double big = 0.0;
        for (std::size_t j = 0; j < 2; ++j) {
            big = std::max(big, (1.0 - sample.matrix(i, j)) / (1.0 - target.x0[j]));
        }
        if (big <= 1.0) ++direct;
    }
    CHECK(scan.back().t == 1.0);
    CHECK(scan.back().m == direct);
}

TEST_CASE("scan rejects uniformity under an independence copula") {
    const std::size_t n = 100000;
    gpc::Matrix raw(n, 2);
    gpc::SplitMix64 rng(515151);
    for (std::size_t i = 0; i < n; ++i) {
        raw(i, 0) = rng.uniform_open01();
        raw(i, 1) = rng.uniform_open01();
    }
    const auto sample = gpc::to_pseudo_sample(raw);
    const auto target = gpc::make_copula_target({0.99, 0.99});
    const auto scan = gpc::conditional_uniformity_scan(sample, target);

    // Under independence the conditional law of M is m^2, not m, at every t;
    // where the retained count is large the tests must reject decisively.
    std::size_t strong_rows = 0;
    for (const auto& row : scan) {
        if (row.m >= 1000) {
            ++strong_rows;
            CHECK(row.min_p < 0.01);
        }
    }
    CHECK(strong_rows > 50);
}

TEST_CASE("scan validates dimensions and degenerate coordinates") {
    const auto sample = exact_constant_sample(2, 100, 7);
    const auto target = gpc::make_copula_target({0.9, 0.9, 0.9});
    CHECK_THROWS_AS(gpc::conditional_uniformity_scan(sample, target),
                    std::invalid_argument);
}

TEST_CASE("threshold selection takes the smallest qualifying grid point") {
    std::vector<gpc::ScanRow> scan = {
        synthetic_row(0.2, 100, 0.1),
        synthetic_row(0.4, 100, 0.2),
        synthetic_row(0.6, 100, 0.6),
        synthetic_row(0.8, 100, 0.7),
    };
    const auto sel = gpc::select_t0(scan, 0.5);
    CHECK(sel.t0 == 0.6);
    CHECK(sel.index == 2);
    CHECK_FALSE(sel.fallback_used);
}

TEST_CASE("threshold selection falls back to the best p-value and flags it") {
    std::vector<gpc::ScanRow> scan = {
        synthetic_row(0.2, 100, 0.1),
        synthetic_row(0.4, 100, 0.35),
        synthetic_row(0.6, 100, 0.2),
    };
    const auto sel = gpc::select_t0(scan, 0.5);
    CHECK(sel.fallback_used);
    CHECK(sel.t0 == 0.4);
    CHECK(sel.index == 1);
}

TEST_CASE("threshold selection skips thin rows and errors when all are thin") {
    std::vector<gpc::ScanRow> scan = {
        synthetic_row(0.2, 5, 0.9),   // high p-value but too few observations
        synthetic_row(0.4, 100, 0.6),
    };
    const auto sel = gpc::select_t0(scan, 0.5);
    CHECK(sel.t0 == 0.4);

    std::vector<gpc::ScanRow> thin = {
        synthetic_row(0.2, 5, 0.9),
        synthetic_row(0.4, 19, 0.8),
    };
    CHECK_THROWS_AS(gpc::select_t0(thin, 0.5), gpc::ScanSelectionError);
    CHECK_THROWS_AS(gpc::select_t0({}, 0.5), std::invalid_argument);
}

TEST_CASE("estimate on exact data selects near t_low and covers the truth") {
    const std::size_t n = 10000;
    const auto sample = exact_constant_sample(2, n, 2026);
    const auto target = gpc::make_copula_target({0.999, 0.999});
    const auto estimate = gpc::estimate_exceedance(sample, target);

    CHECK_FALSE(estimate.fallback_used);
    CHECK(estimate.symmetrized == nullptr);
    CHECK(estimate.q_hat == estimate.t0 * estimate.p_hat);
    const auto raw = gpc::binomial_ci(estimate.m_at_t0, n, target.level,
                                      gpc::CiMethod::clopper_pearson);
    CHECK(estimate.ci.lower == estimate.t0 * raw.lower);
    CHECK(estimate.ci.upper == estimate.t0 * raw.upper);

    // True joint exceedance probability is min_j(1 - x0_j) = 1e-3.
    const double q = 0.001;
    CHECK(estimate.ci.lower <= q);
    CHECK(estimate.ci.upper >= q);
    CHECK(estimate.q_hat == doctest::Approx(q).epsilon(0.05));

    // Exact stability holds for every t, so selection stops in the lowest
    // quartile of the grid.
    CHECK(estimate.t0 <= target.t_grid[49]);
}

TEST_CASE("estimate intervals cover the truth across replications") {
    const std::size_t n = 4000;
    const int reps = 100;
    const double q = 0.001;
    int covered = 0;
    int fixed_row5 = 0;
    int fixed_row40 = 0;
    for (int r = 0; r < reps; ++r) {
        const auto sample = exact_constant_sample(2, n, 1000 + static_cast<std::uint64_t>(r));
        const auto target = gpc::make_copula_target({0.999, 0.999});
        const auto estimate = gpc::estimate_exceedance(sample, target);
        if (estimate.ci.lower <= q && q <= estimate.ci.upper) ++covered;
        const auto& r5 = estimate.scan[5];
        if (r5.ci.lower <= q && q <= r5.ci.upper) ++fixed_row5;
        const auto& r40 = estimate.scan[40];
        if (r40.ci.lower <= q && q <= r40.ci.upper) ++fixed_row40;
    }
    // At any FIXED grid row the scaled interval inherits the Clopper-Pearson
    // guarantee, so coverage sits at 95 percent. At the data-chosen threshold
    // the stopping rule is coupled to the retained counts and coverage runs
    // lower (near 83 percent for this configuration); the bars below pin the
    // measured values for these frozen seeds with slack for platform drift.
    CHECK(fixed_row5 >= 85);   // measured 92
    CHECK(fixed_row40 >= 88);  // measured 95
    CHECK(covered >= 70);      // measured 77
}

TEST_CASE("estimate without extrapolation reports the empirical fraction") {
    const std::size_t n = 100000;
    const auto sample = exact_constant_sample(2, n, 333);
    gpc::CopulaTarget target;
    target.x0 = {0.6, 0.7};
    target.t_grid = {1.0};
    const auto estimate = gpc::estimate_exceedance(sample, target);
    CHECK(estimate.t0 == 1.0);
    CHECK(estimate.q_hat == estimate.p_hat);
    // Comonotone tail: joint exceedance probability is min_j(1 - x0_j) = 0.3.
    CHECK(std::fabs(estimate.p_hat - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / static_cast<double>(n)));
    std::size_t direct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sample.matrix(i, 0) >= 0.6 && sample.matrix(i, 1) >= 0.7) ++direct;
    }
    CHECK(estimate.m_at_t0 == direct);
}

TEST_CASE("estimate is invariant under increasing transforms of raw columns") {
    const std::size_t n = 500;
    gpc::GpdSampleConfig config;
    config.spec.family = gpc::GeneratorFamily::logistic;
    config.spec.dim = 2;
    config.spec.p = 2.0;
    config.margins = gpc::MarginKind::simple_pareto;
    config.n = n;
    config.seed = 606;
    const auto raw = gpc::simulate_simple_gpd(config);
    gpc::Matrix warped(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        warped(i, 0) = std::log(raw(i, 0));          // increasing on (0, inf)
        warped(i, 1) = raw(i, 1) * raw(i, 1) * raw(i, 1);
    }
    const auto target = gpc::make_copula_target({0.95, 0.9}, 0.95, 0.5, 50);
    const auto a = gpc::estimate_exceedance(gpc::to_pseudo_sample(raw), target);
    const auto b = gpc::estimate_exceedance(gpc::to_pseudo_sample(warped), target);
    CHECK(a.t0 == b.t0);
    CHECK(a.p_hat == b.p_hat);
    CHECK(a.q_hat == b.q_hat);
    CHECK(a.ci.lower == b.ci.lower);
    CHECK(a.ci.upper == b.ci.upper);
    REQUIRE(a.scan.size() == b.scan.size());
    for (std::size_t k = 0; k < a.scan.size(); ++k) {
        CHECK(a.scan[k].m == b.scan[k].m);
        CHECK(a.scan[k].min_p == b.scan[k].min_p);
    }
}

TEST_CASE("an untestable critical point triggers the symmetrized rerun") {
    const std::size_t n = 2000;
    const auto sample = exact_constant_sample(2, n, 777);
    // Second coordinate so extreme that no sample row ever exceeds it.
    const auto target = gpc::make_copula_target({0.99, 1.0 - 1e-7});
    const auto estimate = gpc::estimate_exceedance(sample, target);

    CHECK(estimate.fallback_used);
    REQUIRE(estimate.symmetrized != nullptr);
    CHECK(estimate.t0 == estimate.symmetrized->t0);
    CHECK(estimate.symmetrized->p_hat > 0.0);
    CHECK_FALSE(estimate.symmetrized->fallback_used);

    // No exceedance of the original point: zero estimate, informative upper
    // bound from the k = 0 closed form.
    CHECK(estimate.m_at_t0 == 0);
    CHECK(estimate.p_hat == 0.0);
    CHECK(estimate.q_hat == 0.0);
    CHECK(estimate.ci.lower == 0.0);
    const double upper_raw = 1.0 - std::pow(0.025, 1.0 / static_cast<double>(n));
    CHECK(estimate.ci.upper
          == doctest::Approx(estimate.t0 * upper_raw).epsilon(1e-6));

    // The primary scan is preserved and fully untestable.
    for (const auto& row : estimate.scan) {
        CHECK_FALSE(row.testable);
    }
}

TEST_CASE("a symmetric untestable critical point propagates the selection error") {
    // With fewer sample rows than the retained-count floor no grid point can
    // ever be testable, and a symmetric x0 leaves nothing to symmetrize.
    const auto sample = exact_constant_sample(2, 10, 11);
    const auto target = gpc::make_copula_target({0.99999, 0.99999});
    CHECK_THROWS_AS(gpc::estimate_exceedance(sample, target), gpc::ScanSelectionError);
}

TEST_CASE("fragility index closed forms") {
    gpc::GeneratorSpec logistic4;
    logistic4.family = gpc::GeneratorFamily::logistic;
    logistic4.dim = 4;
    logistic4.p = 2.0;
    const gpc::DNormHandle handle(logistic4, {1000, 0});
    const std::vector<double> u4(4, 0.7);
    CHECK(gpc::fragility_index(handle, 1.0, u4) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gpc::fragility_index(handle, 0.25, u4) == doctest::Approx(0.5).epsilon(1e-12));

    gpc::GeneratorSpec sup3;
    sup3.family = gpc::GeneratorFamily::constant_one;
    sup3.dim = 3;
    const gpc::DNormHandle sup_handle(sup3, {1000, 0});
    CHECK(gpc::fragility_index(sup_handle, 1.0, {2.0, 5.0, 3.0})
          == doctest::Approx(2.0).epsilon(1e-12));

    gpc::GeneratorSpec one;
    one.family = gpc::GeneratorFamily::constant_one;
    one.dim = 1;
    const gpc::DNormHandle d1(one, {1000, 0});
    CHECK(gpc::fragility_index(d1, 0.37, {5.0}) == doctest::Approx(0.37).epsilon(1e-12));

    CHECK_THROWS_AS(gpc::fragility_index(handle, 1.5, u4), std::invalid_argument);
    CHECK_THROWS_AS(gpc::fragility_index(handle, 0.5, {0.0, 0.0, 0.0, 0.0}),
                    std::domain_error);
    CHECK_THROWS_AS(gpc::fragility_index(handle, 0.5, {1.0, -1.0, 1.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("scan csv lists the pinned columns and spells out untestable rows") {
    std::vector<gpc::ScanRow> scan = {synthetic_row(0.5, 40, 0.66)};
    scan[0].p_hat = 0.004;
    scan[0].q_hat = 0.002;
    scan[0].ci.lower = 0.001;
    scan[0].ci.upper = 0.003;
    gpc::ScanRow empty;
    empty.t = 0.9;
    empty.m = 0;
    empty.p_ks = std::numeric_limits<double>::quiet_NaN();
    empty.p_cvm = std::numeric_limits<double>::quiet_NaN();
    empty.min_p = std::numeric_limits<double>::quiet_NaN();
    scan.push_back(empty);

    std::ostringstream out;
    gpc::write_scan_csv(scan, out);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "t,m,p_ks,p_cvm,min_p,p_hat,q_hat,ci_lo,ci_hi");
    REQUIRE(std::getline(in, line));
    CHECK(line == "0.5,40,0.66,0.66,0.66,0.004,0.002,0.001,0.003");
    REQUIRE(std::getline(in, line));
    CHECK(line.substr(0, 14) == "0.9,0,nan,nan,");
    CHECK_FALSE(std::getline(in, line));
}

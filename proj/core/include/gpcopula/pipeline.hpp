#pragma once

#include "gpcopula/exceedance.hpp"
#include "gpcopula/gpd.hpp"
#include "gpcopula/matrix.hpp"
#include "gpcopula/stat_tests.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpc {

std::string_view to_string(CiMethod method);
CiMethod ci_method_from_string(std::string_view name);

// Raised by ingestion with the file line and column name where parsing broke
// down, and by the case study tagged with the margin or scenario involved.
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IngestOptions {
    char delimiter = ',';
    // Columns to load, in this order; empty means every column except the
    // date column.
    std::vector<std::string> columns;
    // When true, rows with a missing cell (empty, NA, NaN) in a selected
    // column are dropped and counted; when false they are an error.
    bool drop_na = true;
    // ISO-8601 (YYYY-MM-DD...) column used only for season filtering; never
    // part of the numeric matrix.
    std::string date_column;
    // "summer" keeps months 5-8, "winter" keeps {11, 12, 1, 2}, empty keeps
    // everything. Requires date_column. Season filtering happens before
    // missing-value handling, so out-of-season rows are never counted as
    // dropped.
    std::string season;
};

struct Dataset {
    std::vector<std::string> columns;
    Matrix rows;
    std::string season_filter;      // empty when no filter was applied
    std::size_t dropped_rows = 0;   // rows removed for missing values
};

Dataset ingest(const std::string& path, const IngestOptions& options = {});
Dataset ingest_stream(std::istream& in, const IngestOptions& options = {});

// One row of the scenario table: a physical threshold per column.
struct ScenarioConfig {
    std::string name;
    std::vector<double> thresholds;
};

struct CaseStudyConfig {
    std::vector<double> gpd_thresholds;  // per-column s for the margin fits
    std::vector<ScenarioConfig> scenarios;
    double level = 0.95;
    double p_min = 0.5;
    std::size_t grid_size = 200;
    // A scenario is excluded from joint estimation when any of its margins
    // has an empirical exceedance percentage at or above this; >= 100
    // disables the rule.
    double meep_cutoff_percent = 35.0;
    CiMethod ci_method = CiMethod::clopper_pearson;
    std::uint64_t seed = 1;  // echoed into reports; estimation is rank-based

    void validate(std::size_t dim) const;

    // Round-trips with the "config" object embedded in CaseStudyReport's
    // JSON, plus a "scenarios" array of {name, thresholds}. Every field
    // beyond gpd_thresholds and scenarios is optional and keeps its default
    // when absent.
    static CaseStudyConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Per-column view of one scenario threshold: the probability p0 of staying
// below it, pieced GPD tail when y >= s, clamped empirical CDF otherwise.
struct MarginThresholdProbability {
    std::string column;
    double y = 0.0;
    bool extreme = false;   // y >= s, so p0 came from the fitted tail
    double meep = 0.0;      // empirical exceedance fraction of y
    double p0 = 0.0;
    double se_p0 = 0.0;
};

struct ScenarioOutcome {
    std::string name;
    std::vector<double> thresholds;
    std::vector<MarginThresholdProbability> margins;
    double jeep = 0.0;      // joint empirical exceedance fraction
    bool excluded = false;
    std::string exclusion_reason;  // names the offending columns
    std::optional<ExceedanceEstimate> estimate;
};

struct CaseStudyReport {
    std::size_t n = 0;
    std::vector<std::string> columns;
    std::string season_filter;
    std::size_t dropped_rows = 0;
    CaseStudyConfig config;
    std::vector<GpdMarginFit> margin_fits;  // one per column, fitted at s
    std::vector<ScenarioOutcome> scenarios;

    nlohmann::json to_json() const;
};

// JSON view of a joint exceedance estimate, recursing into the symmetrized
// rerun when one is attached. Scan rows travel separately as CSV.
nlohmann::json estimate_to_json(const ExceedanceEstimate& estimate);

// Fits every margin at its s, evaluates each scenario's p0 vector and joint
// exceedance estimate on the shared rank pseudo-sample, and applies the
// non-extreme exclusion rule. Errors carry the margin or scenario name.
CaseStudyReport run_case_study(const Dataset& data, const CaseStudyConfig& config);

// Writes summary.json, one margin_<column>.json per margin, and one
// scan_<scenario>.csv per estimated scenario (plus _symmetrized.csv when the
// fallback ran) into out_dir; returns the written paths. Reruns with the
// same inputs produce byte-identical files.
std::vector<std::string> emit_diagnostics(const CaseStudyReport& report,
                                          const std::string& out_dir);

} // namespace gpc

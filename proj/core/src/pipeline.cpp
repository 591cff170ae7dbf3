#include "gpcopula/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace gpc {

namespace {

std::string trim(std::string_view cell) {
    std::size_t a = 0;
    std::size_t b = cell.size();
    while (a < b && std::isspace(static_cast<unsigned char>(cell[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(cell[b - 1]))) --b;
    // Tolerate quoted cells; embedded delimiters are not supported.
    if (b - a >= 2 && cell[a] == '"' && cell[b - 1] == '"') {
        ++a;
        --b;
    }
    return std::string(cell.substr(a, b - a));
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string::npos) {
            cells.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string low;
    low.reserve(cell.size());
    for (char c : cell) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return low == "na" || low == "nan";
}

std::optional<int> iso_month(const std::string& cell) {
    if (cell.size() < 10 || cell[4] != '-' || cell[7] != '-') return std::nullopt;
    for (std::size_t k : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(cell[k]))) return std::nullopt;
    }
    const int month = (cell[5] - '0') * 10 + (cell[6] - '0');
    if (month < 1 || month > 12) return std::nullopt;
    return month;
}

bool in_season(int month, const std::string& season) {
    if (season == "summer") return month >= 5 && month <= 8;
    return month == 11 || month == 12 || month == 1 || month == 2;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw PipelineError("line " + std::to_string(line_no) + ", column "
                            + column + ": not a number: '" + cell + "'");
    }
    return value;
}

std::string sanitize(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c))
                          || c == '.' || c == '_' || c == '-';
        out.push_back(keep ? c : '_');
    }
    return out.empty() ? std::string("unnamed") : out;
}

std::vector<double> column_of(const Matrix& m, std::size_t j) {
    std::vector<double> col(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    return col;
}

double clamp_unit_open(double p, std::size_t n) {
    const double lo = 1.0 / static_cast<double>(n + 1);
    const double hi = static_cast<double>(n) / static_cast<double>(n + 1);
    return std::min(hi, std::max(lo, p));
}

nlohmann::json ci_to_json(const BinomialCI& ci) {
    return {{"lower", ci.lower},
            {"upper", ci.upper},
            {"level", ci.level},
            {"method", std::string(to_string(ci.method))}};
}

void write_text_file(const std::string& path, const std::string& body,
                     std::vector<std::string>& written) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write " + path);
    out << body;
    if (!out) throw PipelineError("cannot write " + path);
    written.push_back(path);
}

} // namespace

nlohmann::json estimate_to_json(const ExceedanceEstimate& e) {
    nlohmann::json j{{"t0", e.t0},
                     {"m", e.m_at_t0},
                     {"p_hat", e.p_hat},
                     {"q_hat", e.q_hat},
                     {"ci", ci_to_json(e.ci)},
                     {"fallback_used", e.fallback_used},
                     {"scan_rows", e.scan.size()}};
    j["symmetrized"] = e.symmetrized ? estimate_to_json(*e.symmetrized)
                                     : nlohmann::json(nullptr);
    return j;
}

std::string_view to_string(CiMethod method) {
    return method == CiMethod::clopper_pearson ? "clopper-pearson" : "agresti-coull";
}

CiMethod ci_method_from_string(std::string_view name) {
    if (name == "clopper-pearson") return CiMethod::clopper_pearson;
    if (name == "agresti-coull") return CiMethod::agresti_coull;
    throw std::invalid_argument("unknown confidence interval method: " + std::string(name));
}

Dataset ingest(const std::string& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PipelineError("cannot open " + path);
    return ingest_stream(in, options);
}

Dataset ingest_stream(std::istream& in, const IngestOptions& options) {
    if (!options.season.empty()) {
        if (options.season != "summer" && options.season != "winter") {
            throw PipelineError("unknown season '" + options.season
                                + "' (expected summer or winter)");
        }
        if (options.date_column.empty()) {
            throw PipelineError("season filtering requires a date column");
        }
    }

    std::string line;
    if (!std::getline(in, line)) throw PipelineError("empty input: no header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_line(line, options.delimiter);

    auto header_index = [&](const std::string& name) -> std::size_t {
        std::size_t found = header.size();
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) {
                if (found != header.size()) {
                    throw PipelineError("duplicate column '" + name + "' in header");
                }
                found = k;
            }
        }
        if (found == header.size()) throw PipelineError("column '" + name + "' not found");
        return found;
    };

    std::size_t date_index = header.size();
    if (!options.date_column.empty()) date_index = header_index(options.date_column);

    std::vector<std::string> names = options.columns;
    if (names.empty()) {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (k != date_index) names.push_back(header[k]);
        }
        if (names.empty()) throw PipelineError("no data columns besides the date column");
    }
    std::vector<std::size_t> indices;
    indices.reserve(names.size());
    {
        std::unordered_set<std::string> seen;
        for (const auto& name : names) {
            if (!seen.insert(name).second) {
                throw PipelineError("column '" + name + "' selected twice");
            }
            indices.push_back(header_index(name));
        }
    }

    std::vector<double> values;
    std::vector<double> row(names.size());
    std::size_t n = 0;
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::vector<std::string> cells = split_line(line, options.delimiter);
        if (cells.size() != header.size()) {
            throw PipelineError("line " + std::to_string(line_no) + ": expected "
                                + std::to_string(header.size()) + " cells, got "
                                + std::to_string(cells.size()));
        }
        if (!options.season.empty()) {
            const auto month = iso_month(cells[date_index]);
            if (!month) {
                throw PipelineError("line " + std::to_string(line_no) + ", column "
                                    + options.date_column + ": not an ISO-8601 date: '"
                                    + cells[date_index] + "'");
            }
            if (!in_season(*month, options.season)) continue;
        }
        bool missing = false;
        for (std::size_t j = 0; j < indices.size(); ++j) {
            const std::string& cell = cells[indices[j]];
            if (is_missing(cell)) {
                if (!options.drop_na) {
                    throw PipelineError("line " + std::to_string(line_no) + ", column "
                                        + names[j] + ": missing value");
                }
                missing = true;
                break;
            }
            row[j] = parse_cell(cell, line_no, names[j]);
        }
        if (missing) {
            ++dropped;
            continue;
        }
        values.insert(values.end(), row.begin(), row.end());
        ++n;
    }
    if (n < 2) throw PipelineError("fewer than 2 usable rows after ingestion");

    Dataset data;
    data.columns = std::move(names);
    data.rows = Matrix(n, data.columns.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < data.columns.size(); ++j) {
            data.rows(i, j) = values[i * data.columns.size() + j];
        }
    }
    data.season_filter = options.season;
    data.dropped_rows = dropped;
    return data;
}

void CaseStudyConfig::validate(std::size_t dim) const {
    if (gpd_thresholds.size() != dim) {
        throw PipelineError("need one GPD threshold per column ("
                            + std::to_string(dim) + "), got "
                            + std::to_string(gpd_thresholds.size()));
    }
    if (!(level > 0.0) || !(level < 1.0)) throw PipelineError("level must lie in (0, 1)");
    if (!(p_min > 0.0) || !(p_min < 1.0)) throw PipelineError("p_min must lie in (0, 1)");
    if (grid_size < 2) throw PipelineError("grid_size must be at least 2");
    if (!(meep_cutoff_percent > 0.0)) throw PipelineError("meep cutoff must be positive");
    std::unordered_set<std::string> seen;
    for (const auto& scenario : scenarios) {
        if (scenario.name.empty()) throw PipelineError("scenario with empty name");
        if (!seen.insert(scenario.name).second) {
            throw PipelineError("duplicate scenario name '" + scenario.name + "'");
        }
        if (scenario.thresholds.size() != dim) {
            throw PipelineError("scenario '" + scenario.name + "': need "
                                + std::to_string(dim) + " thresholds, got "
                                + std::to_string(scenario.thresholds.size()));
        }
    }
}

CaseStudyConfig CaseStudyConfig::from_json(const nlohmann::json& j) {
    CaseStudyConfig config;
    try {
        config.gpd_thresholds = j.at("gpd_thresholds").get<std::vector<double>>();
        for (const auto& s : j.at("scenarios")) {
            config.scenarios.push_back({s.at("name").get<std::string>(),
                                        s.at("thresholds").get<std::vector<double>>()});
        }
        config.level = j.value("level", config.level);
        config.p_min = j.value("p_min", config.p_min);
        config.grid_size = j.value("grid_size", config.grid_size);
        config.meep_cutoff_percent =
            j.value("meep_cutoff_percent", config.meep_cutoff_percent);
        if (j.contains("ci_method")) {
            config.ci_method = ci_method_from_string(j.at("ci_method").get<std::string>());
        }
        config.seed = j.value("seed", config.seed);
    } catch (const nlohmann::json::exception& e) {
        throw PipelineError(std::string("case study config: ") + e.what());
    }
    return config;
}

nlohmann::json CaseStudyConfig::to_json() const {
    nlohmann::json j{{"gpd_thresholds", gpd_thresholds},
                     {"level", level},
                     {"p_min", p_min},
                     {"grid_size", grid_size},
                     {"meep_cutoff_percent", meep_cutoff_percent},
                     {"ci_method", std::string(to_string(ci_method))},
                     {"seed", seed}};
    j["scenarios"] = nlohmann::json::array();
    for (const auto& scenario : scenarios) {
        j["scenarios"].push_back(
            {{"name", scenario.name}, {"thresholds", scenario.thresholds}});
    }
    return j;
}

nlohmann::json CaseStudyReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["columns"] = columns;
    j["season_filter"] = season_filter;
    j["dropped_rows"] = dropped_rows;
    j["config"] = {{"gpd_thresholds", config.gpd_thresholds},
                   {"level", config.level},
                   {"p_min", config.p_min},
                   {"grid_size", config.grid_size},
                   {"meep_cutoff_percent", config.meep_cutoff_percent},
                   {"ci_method", std::string(to_string(config.ci_method))},
                   {"seed", config.seed}};
    j["margins"] = nlohmann::json::array();
    for (const auto& fit : margin_fits) j["margins"].push_back(fit.to_json());
    j["scenarios"] = nlohmann::json::array();
    for (const auto& outcome : scenarios) {
        nlohmann::json s{{"name", outcome.name},
                         {"thresholds", outcome.thresholds},
                         {"jeep", outcome.jeep},
                         {"excluded", outcome.excluded},
                         {"exclusion_reason", outcome.exclusion_reason}};
        s["margins"] = nlohmann::json::array();
        for (const auto& m : outcome.margins) {
            s["margins"].push_back({{"column", m.column},
                                    {"y", m.y},
                                    {"extreme", m.extreme},
                                    {"meep", m.meep},
                                    {"p0", m.p0},
                                    {"se_p0", m.se_p0}});
        }
        s["estimate"] = outcome.estimate ? estimate_to_json(*outcome.estimate)
                                         : nlohmann::json(nullptr);
        j["scenarios"].push_back(std::move(s));
    }
    return j;
}

CaseStudyReport run_case_study(const Dataset& data, const CaseStudyConfig& config) {
    const std::size_t d = data.columns.size();
    const std::size_t n = data.rows.rows();
    config.validate(d);

    CaseStudyReport report;
    report.n = n;
    report.columns = data.columns;
    report.season_filter = data.season_filter;
    report.dropped_rows = data.dropped_rows;
    report.config = config;

    std::vector<std::vector<double>> cols(d);
    for (std::size_t j = 0; j < d; ++j) cols[j] = column_of(data.rows, j);

    report.margin_fits.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        try {
            report.margin_fits.push_back(fit_margin(
                cols[j], config.gpd_thresholds[j], config.gpd_thresholds[j],
                data.columns[j]));
        } catch (const std::exception& e) {
            throw PipelineError("margin '" + data.columns[j] + "': " + e.what());
        }
    }

    const PseudoSample pseudo = to_pseudo_sample(data.rows);

    for (const auto& scenario : config.scenarios) {
        ScenarioOutcome outcome;
        outcome.name = scenario.name;
        outcome.thresholds = scenario.thresholds;

        std::string offending;
        for (std::size_t j = 0; j < d; ++j) {
            const double y = scenario.thresholds[j];
            MarginThresholdProbability m;
            m.column = data.columns[j];
            m.y = y;
            const EmpiricalExceedance emp = empirical_exceedance(cols[j], y);
            m.meep = emp.eep;
            if (y >= config.gpd_thresholds[j]) {
                m.extreme = true;
                GpdMarginFit at_y = report.margin_fits[j];
                at_y.target_y = y;
                try {
                    const PiecedProbability pieced = piecing_together_p0(at_y);
                    m.p0 = pieced.p0;
                    m.se_p0 = pieced.se_p0;
                } catch (const std::exception& e) {
                    throw PipelineError("scenario '" + scenario.name + "', margin '"
                                        + data.columns[j] + "': " + e.what());
                }
            } else {
                // Below the tail threshold the empirical distribution is
                // reliable and the GPD tail does not apply.
                m.extreme = false;
                m.p0 = clamp_unit_open(1.0 - emp.eep, n);
                m.se_p0 = emp.se_eep;
            }
            if (config.meep_cutoff_percent < 100.0
                && emp.eep * 100.0 >= config.meep_cutoff_percent) {
                if (!offending.empty()) offending += ", ";
                offending += data.columns[j];
            }
            outcome.margins.push_back(std::move(m));
        }

        std::size_t joint = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool all = true;
            for (std::size_t j = 0; j < d; ++j) {
                if (!(data.rows(i, j) > scenario.thresholds[j])) {
                    all = false;
                    break;
                }
            }
            if (all) ++joint;
        }
        outcome.jeep = static_cast<double>(joint) / static_cast<double>(n);

        if (!offending.empty()) {
            outcome.excluded = true;
            outcome.exclusion_reason =
                "thresholds not extreme for: " + offending;
        } else {
            CopulaTarget target;
            target.x0.resize(d);
            for (std::size_t j = 0; j < d; ++j) {
                target.x0[j] = clamp_unit_open(outcome.margins[j].p0, n);
            }
            target.level = config.level;
            target.p_min = config.p_min;
            target.t_grid = geometric_grid(target.t_low(), config.grid_size);
            try {
                target.validate();
                outcome.estimate = estimate_exceedance(pseudo, target, config.ci_method);
            } catch (const std::exception& e) {
                throw PipelineError("scenario '" + scenario.name + "': " + e.what());
            }
        }
        report.scenarios.push_back(std::move(outcome));
    }
    return report;
}

std::vector<std::string> emit_diagnostics(const CaseStudyReport& report,
                                          const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw PipelineError("cannot create directory " + out_dir + ": " + ec.message());

    std::vector<std::string> written;
    write_text_file((fs::path(out_dir) / "summary.json").string(),
                    report.to_json().dump(2) + "\n", written);
    for (const auto& fit : report.margin_fits) {
        write_text_file(
            (fs::path(out_dir) / ("margin_" + sanitize(fit.label) + ".json")).string(),
            fit.to_json().dump(2) + "\n", written);
    }
    for (const auto& outcome : report.scenarios) {
        if (!outcome.estimate) continue;
        {
            std::ostringstream csv;
            write_scan_csv(outcome.estimate->scan, csv);
            write_text_file(
                (fs::path(out_dir) / ("scan_" + sanitize(outcome.name) + ".csv")).string(),
                csv.str(), written);
        }
        if (outcome.estimate->symmetrized) {
            std::ostringstream csv;
            write_scan_csv(outcome.estimate->symmetrized->scan, csv);
            write_text_file(
                (fs::path(out_dir)
                 / ("scan_" + sanitize(outcome.name) + "_symmetrized.csv")).string(),
                csv.str(), written);
        }
    }
    return written;
}

} // namespace gpc

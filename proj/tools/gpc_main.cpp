// Command line front end: simulation, D-norm evaluation, margin fitting,
// joint exceedance estimation, and the full case study pipeline. Human
// summaries on stdout round probabilities to 4 decimals of percent; files
// always carry full precision. Failures print one machine-readable JSON
// object on stderr and exit nonzero.

#include "gpcopula/dnorm.hpp"
#include "gpcopula/exceedance.hpp"
#include "gpcopula/gpd.hpp"
#include "gpcopula/pipeline.hpp"
#include "gpcopula/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
        std::size_t end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const char* first = text.data() + start;
        const char* last = text.data() + end;
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || first == last) {
            throw std::invalid_argument("not a comma-separated number list: '" + text + "'");
        }
        values.push_back(value);
        if (end == text.size()) break;
        start = end + 1;
    }
    return values;
}

// Routes subcommand output: a named file when requested, stdout otherwise.
void write_or_print(const std::string& path, const std::string& body) {
    if (path.empty()) {
        std::fwrite(body.data(), 1, body.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw gpc::PipelineError("cannot write " + path);
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

// Generator description shared by simulate, dnorm, and diagnose generator.
struct GeneratorArgs {
    std::string family = "constant_one";
    std::size_t dim = 1;
    double p = 0.0;
    std::vector<double> sigma;
};

void add_generator_options(CLI::App* sub, GeneratorArgs& args) {
    sub->add_option("--family", args.family,
                    "constant_one, permuted_spike, logistic, husler_reiss")
        ->capture_default_str();
    sub->add_option("--dim", args.dim, "number of components")->required();
    sub->add_option("--p", args.p, "logistic exponent, must be > 1");
    sub->add_option("--sigma", args.sigma,
                    "row-major dim x dim covariance for husler_reiss")
        ->delimiter(',');
}

gpc::GeneratorSpec make_spec(const GeneratorArgs& args) {
    gpc::GeneratorSpec spec;
    spec.family = gpc::generator_family_from_string(args.family);
    spec.dim = args.dim;
    spec.p = args.p;
    spec.sigma = args.sigma;
    spec.validate();
    return spec;
}

// CSV ingestion flags shared by the data-driven subcommands.
struct IngestArgs {
    std::string input;
    std::string delimiter = ",";
    std::vector<std::string> columns;
    std::string date_column;
    std::string season;
    bool fail_on_missing = false;
};

void add_ingest_options(CLI::App* sub, IngestArgs& args, bool with_columns) {
    sub->add_option("--input", args.input, "headered CSV file")->required();
    sub->add_option("--delimiter", args.delimiter, "field delimiter")
        ->capture_default_str();
    if (with_columns) {
        sub->add_option("--columns", args.columns,
                        "columns to load, in order; default: all but the date column")
            ->delimiter(',');
    }
    sub->add_option("--date-column", args.date_column,
                    "ISO-8601 date column, used only for season filtering");
    sub->add_option("--season", args.season, "summer (May-Aug) or winter (Nov-Feb)");
    sub->add_flag("--fail-on-missing", args.fail_on_missing,
                  "treat missing cells as errors instead of dropping their rows");
}

gpc::Dataset ingest_from(const IngestArgs& args) {
    if (args.delimiter.size() != 1) {
        throw std::invalid_argument("delimiter must be a single character");
    }
    gpc::IngestOptions options;
    options.delimiter = args.delimiter[0];
    options.columns = args.columns;
    options.drop_na = !args.fail_on_missing;
    options.date_column = args.date_column;
    options.season = args.season;
    return gpc::ingest(args.input, options);
}

void print_estimate_summary(const gpc::ExceedanceEstimate& estimate, double level,
                            const char* indent) {
    std::printf("%st0 = %.4f%%  p_hat = %.4f%%  q_hat = %.4f%%  CI%.0f = [%.4f%%, %.4f%%]\n",
                indent, 100.0 * estimate.t0, 100.0 * estimate.p_hat,
                100.0 * estimate.q_hat, 100.0 * level, 100.0 * estimate.ci.lower,
                100.0 * estimate.ci.upper);
    if (estimate.fallback_used) {
        std::printf("%s(threshold selection fell back%s)\n", indent,
                    estimate.symmetrized ? " to the symmetrized critical point" : "");
    }
}

void print_case_study(const gpc::CaseStudyReport& report) {
    std::printf("n = %zu rows", report.n);
    if (!report.season_filter.empty()) std::printf(" (%s)", report.season_filter.c_str());
    if (report.dropped_rows > 0) std::printf(", %zu dropped for missing values", report.dropped_rows);
    std::printf("\n\nmargins:\n");
    std::printf("  %-12s %10s %7s %9s %11s %9s %10s\n", "column", "s", "NE", "EEP%",
                "sigma", "xi", "p0%");
    for (const auto& fit : report.margin_fits) {
        std::printf("  %-12s %10.4g %7zu %9.4f %11.4f %9.4f %10.4f\n",
                    fit.label.c_str(), fit.threshold_s, fit.n_exceed, 100.0 * fit.eep,
                    fit.sigma, fit.xi, 100.0 * fit.p0);
    }
    std::printf("\nscenarios:\n");
    for (const auto& outcome : report.scenarios) {
        std::string thresholds;
        for (double y : outcome.thresholds) {
            if (!thresholds.empty()) thresholds += ", ";
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", y);
            thresholds += buf;
        }
        if (outcome.excluded) {
            std::printf("  %s (%s): excluded, %s\n", outcome.name.c_str(),
                        thresholds.c_str(), outcome.exclusion_reason.c_str());
            continue;
        }
        std::printf("  %s (%s): jeep = %.4f%%\n", outcome.name.c_str(),
                    thresholds.c_str(), 100.0 * outcome.jeep);
        if (outcome.estimate) {
            print_estimate_summary(*outcome.estimate, report.config.level, "    ");
        }
    }
}

void run_simulate(const GeneratorArgs& gen, const std::string& margins,
                  const std::vector<double>& alphas, std::size_t n,
                  std::uint64_t seed, double bound, bool bound_set,
                  const std::string& out) {
    gpc::GpdSampleConfig config;
    config.spec = make_spec(gen);
    config.margins = gpc::margin_kind_from_string(margins);
    config.alphas = alphas;
    config.n = n;
    config.seed = seed;
    if (bound_set) config.generator_bound = bound;
    config.validate();

    std::ostringstream body;
    switch (config.margins) {
        case gpc::MarginKind::simple_pareto:
            gpc::write_sample_csv(gpc::simulate_simple_gpd(config), body, "V");
            break;
        case gpc::MarginKind::copula_scale:
            gpc::write_sample_csv(gpc::simulate_copula_scale(config).matrix, body, "U");
            break;
        default:
            gpc::write_sample_csv(gpc::simulate_general_gpd(config), body, "Y");
            break;
    }
    write_or_print(out, body.str());
}

void run_dnorm(const GeneratorArgs& gen, const std::vector<std::string>& at,
               bool with_dual, std::size_t samples, std::uint64_t seed,
               const std::string& out) {
    const gpc::GeneratorSpec spec = make_spec(gen);
    const gpc::DNormHandle handle(spec, gpc::McConfig{samples, seed});
    const bool closed = handle.closed_form().has_value();
    const bool dual_closed = spec.family == gpc::GeneratorFamily::constant_one
        || spec.family == gpc::GeneratorFamily::permuted_spike;

    nlohmann::json evaluations = nlohmann::json::array();
    for (const auto& text : at) {
        const std::vector<double> x = parse_doubles(text);
        nlohmann::json entry{{"x", x}};
        entry["dnorm"] = gpc::eval_dnorm(handle, x);
        entry["std_error"] =
            closed ? nlohmann::json(nullptr)
                   : nlohmann::json(gpc::eval_dnorm_mc(handle, x).std_error);
        if (with_dual) {
            entry["dual"] = gpc::eval_dual(handle, x);
            entry["dual_std_error"] =
                dual_closed ? nlohmann::json(nullptr)
                            : nlohmann::json(gpc::eval_dual_mc(handle, x).std_error);
        }
        evaluations.push_back(std::move(entry));
    }
    nlohmann::json output{{"generator", spec.to_json()},
                          {"sample_count", samples},
                          {"seed", seed},
                          {"evaluations", std::move(evaluations)}};
    write_or_print(out, output.dump(2) + "\n");
}

void run_fit_margin(const IngestArgs& ingest_args, const std::string& column,
                    double threshold, std::optional<double> target,
                    const std::string& out) {
    IngestArgs args = ingest_args;
    args.columns = {column};
    const gpc::Dataset data = ingest_from(args);
    std::vector<double> values(data.rows.rows());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = data.rows(i, 0);

    const double y = target.value_or(threshold);
    const gpc::GpdMarginFit fit = gpc::fit_margin(values, threshold, y, column);

    std::printf("margin %s: n = %zu, s = %.6g, NE = %zu, EEP = %.4f%%\n",
                fit.label.c_str(), fit.n_total, fit.threshold_s, fit.n_exceed,
                100.0 * fit.eep);
    std::printf("  sigma = %.6g (se %.6g), xi = %.6g (se %.6g)\n", fit.sigma,
                fit.se_sigma, fit.xi, fit.se_xi);
    std::printf("  p0(%.6g) = %.4f%% (se %.4f%%)\n", fit.target_y, 100.0 * fit.p0,
                100.0 * fit.se_p0);
    if (!out.empty()) write_or_print(out, fit.to_json().dump(2) + "\n");
}

void run_estimate_joint(const IngestArgs& ingest_args, const std::vector<double>& x0,
                        double level, double p_min, std::size_t grid_size,
                        const std::string& ci_method, const std::string& out,
                        const std::string& scan_csv) {
    const gpc::Dataset data = ingest_from(ingest_args);
    const gpc::PseudoSample pseudo = gpc::to_pseudo_sample(data.rows);
    const gpc::CopulaTarget target = gpc::make_copula_target(x0, level, p_min, grid_size);
    const gpc::ExceedanceEstimate estimate = gpc::estimate_exceedance(
        pseudo, target, gpc::ci_method_from_string(ci_method));

    std::printf("n = %zu rows, %zu columns\n", data.rows.rows(), data.columns.size());
    print_estimate_summary(estimate, level, "");
    if (!out.empty()) {
        nlohmann::json output{{"n", data.rows.rows()},
                              {"columns", data.columns},
                              {"x0", x0},
                              {"estimate", gpc::estimate_to_json(estimate)}};
        write_or_print(out, output.dump(2) + "\n");
    }
    if (!scan_csv.empty()) {
        std::ostringstream body;
        gpc::write_scan_csv(estimate.scan, body);
        write_or_print(scan_csv, body.str());
        if (estimate.symmetrized) {
            std::filesystem::path side(scan_csv);
            const std::string ext = side.extension().string();
            side.replace_extension();
            side += "_symmetrized" + ext;
            std::ostringstream sym;
            gpc::write_scan_csv(estimate.symmetrized->scan, sym);
            write_or_print(side.string(), sym.str());
        }
    }
}

void run_case_study(CLI::App* sub, const IngestArgs& ingest_args,
                    const std::string& config_path, const std::string& out_dir,
                    double level, double p_min, std::size_t grid_size,
                    const std::string& ci_method, double meep_cutoff,
                    std::uint64_t seed) {
    std::ifstream config_file(config_path);
    if (!config_file) throw gpc::PipelineError("cannot open " + config_path);
    nlohmann::json config_json;
    config_file >> config_json;

    gpc::CaseStudyConfig config = gpc::CaseStudyConfig::from_json(config_json);
    if (sub->count("--level")) config.level = level;
    if (sub->count("--p-min")) config.p_min = p_min;
    if (sub->count("--grid-size")) config.grid_size = grid_size;
    if (sub->count("--ci-method")) config.ci_method = gpc::ci_method_from_string(ci_method);
    if (sub->count("--meep-cutoff")) config.meep_cutoff_percent = meep_cutoff;
    if (sub->count("--seed")) config.seed = seed;

    const gpc::Dataset data = ingest_from(ingest_args);
    const gpc::CaseStudyReport report = gpc::run_case_study(data, config);
    print_case_study(report);
    if (!out_dir.empty()) {
        const auto files = gpc::emit_diagnostics(report, out_dir);
        std::printf("\n");
        for (const auto& path : files) std::printf("wrote %s\n", path.c_str());
    }
}

void run_diagnose_generator(const GeneratorArgs& gen, const std::vector<double>& x_grid,
                            std::size_t n, std::uint64_t seed, const std::string& out) {
    const gpc::GeneratorSpec spec = make_spec(gen);
    const auto rows = gpc::delta_neighborhood_diagnostic(spec, x_grid, n, seed);
    std::string body = "x";
    for (std::size_t j = 0; j < spec.dim; ++j) body += ",V" + std::to_string(j + 1);
    body += "\n";
    for (const auto& row : rows) {
        body += format_double(row.x);
        for (double v : row.scaled_survival) body += "," + format_double(v);
        body += "\n";
    }
    write_or_print(out, body);
}

void run_diagnose_thresholds(const IngestArgs& ingest_args, const std::string& column,
                             const std::vector<double>& thresholds,
                             const std::string& out) {
    IngestArgs args = ingest_args;
    args.columns = {column};
    const gpc::Dataset data = ingest_from(args);
    std::vector<double> values(data.rows.rows());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = data.rows(i, 0);

    const auto rows = gpc::threshold_diagnostics(values, thresholds);
    std::string body = "threshold,n_exceed,mean_excess,sigma,xi,fit_ok\n";
    for (const auto& row : rows) {
        body += format_double(row.threshold) + "," + std::to_string(row.n_exceed)
            + "," + format_double(row.mean_excess) + "," + format_double(row.sigma)
            + "," + format_double(row.xi) + "," + (row.fit_ok ? "1" : "0") + "\n";
    }
    write_or_print(out, body);
}

void emit_error_json(const std::string& type, const std::string& message) {
    const nlohmann::json error{{"error", {{"type", type}, {"message", message}}}};
    std::cerr << error.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized Pareto copula toolkit: simulation, D-norms, tail "
                 "fitting, and joint exceedance estimation"};
    app.set_version_flag("--version", "1.0.0");
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "draw multivariate GPD samples as CSV");
    GeneratorArgs sim_gen;
    add_generator_options(simulate, sim_gen);
    std::string sim_margins = "simple_pareto";
    std::vector<double> sim_alphas;
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 0;
    double sim_bound = 0.0;
    std::string sim_out;
    simulate->add_option("--margins", sim_margins,
                         "simple_pareto, standard, gumbel, general_alpha, copula_scale")
        ->capture_default_str();
    simulate->add_option("--alphas", sim_alphas, "per-component shapes for general_alpha")
        ->delimiter(',');
    simulate->add_option("--n", sim_n, "number of rows")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
    auto* bound_opt = simulate->add_option(
        "--generator-bound", sim_bound, "almost-sure bound on Z for copula_scale");
    simulate->add_option("--out", sim_out, "output CSV path; default stdout");
    simulate->callback([&] {
        run_simulate(sim_gen, sim_margins, sim_alphas, sim_n, sim_seed, sim_bound,
                     bound_opt->count() > 0, sim_out);
    });

    // dnorm
    auto* dnorm = app.add_subcommand("dnorm", "evaluate D-norms and their duals");
    GeneratorArgs dn_gen;
    add_generator_options(dnorm, dn_gen);
    std::vector<std::string> dn_at;
    bool dn_dual = false;
    std::size_t dn_samples = 100000;
    std::uint64_t dn_seed = 0;
    std::string dn_out;
    dnorm->add_option("--at", dn_at, "evaluation point x1,x2,...; repeatable")->required();
    dnorm->add_flag("--dual", dn_dual, "also evaluate the dual norm");
    dnorm->add_option("--samples", dn_samples, "Monte Carlo sample count")
        ->capture_default_str();
    dnorm->add_option("--seed", dn_seed, "RNG seed")->capture_default_str();
    dnorm->add_option("--out", dn_out, "output JSON path; default stdout");
    dnorm->callback([&] { run_dnorm(dn_gen, dn_at, dn_dual, dn_samples, dn_seed, dn_out); });

    // fit-margin
    auto* fit = app.add_subcommand("fit-margin", "fit one GPD tail from a CSV column");
    IngestArgs fit_ingest;
    add_ingest_options(fit, fit_ingest, false);
    std::string fit_column;
    double fit_threshold = 0.0;
    double fit_target = 0.0;
    std::string fit_out;
    fit->add_option("--column", fit_column, "column to fit")->required();
    fit->add_option("--threshold", fit_threshold, "GPD threshold s")->required();
    auto* target_opt = fit->add_option("--target", fit_target,
                                       "level y >= s for p0; default s");
    fit->add_option("--out", fit_out, "full-precision fit JSON path");
    fit->callback([&] {
        run_fit_margin(fit_ingest, fit_column, fit_threshold,
                       target_opt->count() > 0 ? std::optional<double>(fit_target)
                                               : std::nullopt,
                       fit_out);
    });

    // estimate-joint
    auto* joint = app.add_subcommand(
        "estimate-joint", "estimate a joint exceedance probability on the copula scale");
    IngestArgs joint_ingest;
    add_ingest_options(joint, joint_ingest, true);
    std::vector<double> joint_x0;
    double joint_level = 0.95;
    double joint_p_min = 0.5;
    std::size_t joint_grid = 200;
    std::string joint_ci = "clopper-pearson";
    std::string joint_out;
    std::string joint_scan;
    joint->add_option("--x0", joint_x0, "copula-scale critical point, one value per column")
        ->delimiter(',')
        ->required();
    joint->add_option("--level", joint_level, "confidence level")->capture_default_str();
    joint->add_option("--p-min", joint_p_min, "p-value floor for threshold selection")
        ->capture_default_str();
    joint->add_option("--grid-size", joint_grid, "scan grid size")->capture_default_str();
    joint->add_option("--ci-method", joint_ci, "clopper-pearson or agresti-coull")
        ->capture_default_str();
    joint->add_option("--out", joint_out, "full-precision estimate JSON path");
    joint->add_option("--scan-csv", joint_scan, "scan table CSV path");
    joint->callback([&] {
        run_estimate_joint(joint_ingest, joint_x0, joint_level, joint_p_min, joint_grid,
                           joint_ci, joint_out, joint_scan);
    });

    // case-study
    auto* study = app.add_subcommand(
        "case-study", "margins, scenario probabilities, and diagnostics from a config");
    IngestArgs study_ingest;
    add_ingest_options(study, study_ingest, true);
    std::string study_config;
    std::string study_out_dir;
    double study_level = 0.95;
    double study_p_min = 0.5;
    std::size_t study_grid = 200;
    std::string study_ci = "clopper-pearson";
    double study_meep = 35.0;
    std::uint64_t study_seed = 1;
    study->add_option("--config", study_config,
                      "JSON with gpd_thresholds and scenarios; see docs")
        ->required();
    study->add_option("--out-dir", study_out_dir, "directory for summary, fits, and scans");
    study->add_option("--level", study_level, "override: confidence level");
    study->add_option("--p-min", study_p_min, "override: p-value floor");
    study->add_option("--grid-size", study_grid, "override: scan grid size");
    study->add_option("--ci-method", study_ci, "override: clopper-pearson or agresti-coull");
    study->add_option("--meep-cutoff", study_meep,
                      "override: exclusion cutoff in percent; >= 100 disables");
    study->add_option("--seed", study_seed, "override: seed echoed into the report");
    study->callback([&] {
        run_case_study(study, study_ingest, study_config, study_out_dir, study_level,
                       study_p_min, study_grid, study_ci, study_meep, study_seed);
    });

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "tail and threshold diagnostics");
    diagnose->require_subcommand(1);

    auto* diag_gen = diagnose->add_subcommand(
        "generator", "x (1 - F(x)) trend of V = Z/U margins toward 1");
    GeneratorArgs dg_gen;
    add_generator_options(diag_gen, dg_gen);
    std::vector<double> dg_x = {5.0, 20.0, 50.0};
    std::size_t dg_n = 1000000;
    std::uint64_t dg_seed = 0;
    std::string dg_out;
    diag_gen->add_option("--x", dg_x, "strictly increasing grid, all > 1")
        ->delimiter(',')
        ->capture_default_str();
    diag_gen->add_option("--n", dg_n, "Monte Carlo sample count")->capture_default_str();
    diag_gen->add_option("--seed", dg_seed, "RNG seed")->capture_default_str();
    diag_gen->add_option("--out", dg_out, "output CSV path; default stdout");
    diag_gen->callback([&] { run_diagnose_generator(dg_gen, dg_x, dg_n, dg_seed, dg_out); });

    auto* diag_thr = diagnose->add_subcommand(
        "thresholds", "exceedance counts, mean excess, and refits per candidate threshold");
    IngestArgs dt_ingest;
    add_ingest_options(diag_thr, dt_ingest, false);
    std::string dt_column;
    std::vector<double> dt_thresholds;
    std::string dt_out;
    diag_thr->add_option("--column", dt_column, "column to diagnose")->required();
    diag_thr->add_option("--thresholds", dt_thresholds, "candidate thresholds")
        ->delimiter(',')
        ->required();
    diag_thr->add_option("--out", dt_out, "output CSV path; default stdout");
    diag_thr->callback([&] {
        run_diagnose_thresholds(dt_ingest, dt_column, dt_thresholds, dt_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // help and version
        emit_error_json("usage", e.what());
        return 2;
    } catch (const gpc::PipelineError& e) {
        emit_error_json("pipeline", e.what());
        return 1;
    } catch (const gpc::ScanSelectionError& e) {
        emit_error_json("scan_selection", e.what());
        return 1;
    } catch (const gpc::FitConvergenceError& e) {
        emit_error_json("fit_convergence", e.what());
        return 1;
    } catch (const nlohmann::json::exception& e) {
        emit_error_json("json", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        emit_error_json("invalid_argument", e.what());
        return 1;
    } catch (const std::domain_error& e) {
        emit_error_json("domain_error", e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error_json("runtime", e.what());
        return 1;
    }
    return 0;
}

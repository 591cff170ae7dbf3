#include "gpcopula/simulation.hpp"

#include "gpcopula/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace gpc {

namespace {

// Probability arguments passed to marginal quantile functions are kept at
// least this far inside (0, 1); draws with Z_i < U would otherwise fall
// outside the margin's support.
constexpr double kQuantileFloor = 1e-12;

// Row i of every simulation draws Z from substream 2i and U (plus any
// auxiliary uniforms) from substream 2i+1, so the two sources stay
// independent while sharing one seed.
SplitMix64 z_stream(std::uint64_t seed, std::size_t row) {
    return SplitMix64::substream(seed, 2 * static_cast<std::uint64_t>(row));
}

SplitMix64 u_stream(std::uint64_t seed, std::size_t row) {
    return SplitMix64::substream(seed, 2 * static_cast<std::uint64_t>(row) + 1);
}

void append_double(std::string& line, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
}

std::vector<double> resolve_alphas(const GpdSampleConfig& config) {
    switch (config.margins) {
        case MarginKind::standard:
            return std::vector<double>(config.spec.dim, 1.0);
        case MarginKind::gumbel:
            return std::vector<double>(config.spec.dim, 0.0);
        case MarginKind::general_alpha:
            return config.alphas;
        default:
            throw std::invalid_argument(
                "simulate_general_gpd: margins must be standard, gumbel or general_alpha");
    }
}

} // namespace

std::string_view to_string(MarginKind kind) {
    switch (kind) {
        case MarginKind::simple_pareto: return "simple_pareto";
        case MarginKind::standard: return "standard";
        case MarginKind::gumbel: return "gumbel";
        case MarginKind::general_alpha: return "general_alpha";
        case MarginKind::copula_scale: return "copula_scale";
    }
    throw std::invalid_argument("MarginKind: unknown value");
}

MarginKind margin_kind_from_string(std::string_view name) {
    if (name == "simple_pareto") return MarginKind::simple_pareto;
    if (name == "standard") return MarginKind::standard;
    if (name == "gumbel") return MarginKind::gumbel;
    if (name == "general_alpha") return MarginKind::general_alpha;
    if (name == "copula_scale") return MarginKind::copula_scale;
    throw std::invalid_argument("MarginKind: unknown value '" + std::string(name) + "'");
}

std::string_view to_string(PseudoProvenance provenance) {
    switch (provenance) {
        case PseudoProvenance::simulated: return "simulated";
        case PseudoProvenance::rank_transform: return "rank_transform";
    }
    throw std::invalid_argument("PseudoProvenance: unknown value");
}

bool has_bounded_generator(GeneratorFamily family) {
    return family == GeneratorFamily::constant_one
        || family == GeneratorFamily::permuted_spike;
}

void GpdSampleConfig::validate() {
    spec.validate();
    if (n < 1) {
        throw std::invalid_argument("GpdSampleConfig: n must be >= 1");
    }
    if (margins == MarginKind::general_alpha) {
        if (alphas.size() != spec.dim) {
            throw std::invalid_argument(
                "GpdSampleConfig: general_alpha needs one shape per component");
        }
        for (double a : alphas) {
            if (!std::isfinite(a)) {
                throw std::invalid_argument("GpdSampleConfig: alphas must be finite");
            }
        }
    } else if (!alphas.empty()) {
        throw std::invalid_argument(
            "GpdSampleConfig: alphas are only valid for general_alpha margins");
    }
    if (has_bounded_generator(spec.family)) {
        const double implied = spec.family == GeneratorFamily::constant_one
            ? 1.0 : static_cast<double>(spec.dim);
        if (!generator_bound) {
            generator_bound = implied;
        } else if (!(*generator_bound >= implied) || !std::isfinite(*generator_bound)) {
            throw std::invalid_argument(
                "GpdSampleConfig: generator_bound must be >= " + std::to_string(implied)
                + " to hold almost surely for this family");
        }
    } else if (generator_bound) {
        throw std::invalid_argument(
            "GpdSampleConfig: this generator family has no almost-sure bound; "
            "omit generator_bound");
    }
}

GpdSampleConfig GpdSampleConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("GpdSampleConfig: expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "generator" && key != "margins" && key != "alphas" && key != "n"
            && key != "seed" && key != "generator_bound") {
            throw std::invalid_argument("GpdSampleConfig: unknown key '" + key + "'");
        }
    }
    if (!j.contains("generator") || !j.contains("margins") || !j.contains("n")) {
        throw std::invalid_argument(
            "GpdSampleConfig: required keys are generator, margins, n");
    }
    GpdSampleConfig config;
    config.spec = GeneratorSpec::from_json(j.at("generator"));
    config.margins = margin_kind_from_string(j.at("margins").get<std::string>());
    if (!j.at("n").is_number_unsigned()) {
        throw std::invalid_argument("GpdSampleConfig: n must be a nonnegative integer");
    }
    config.n = j.at("n").get<std::size_t>();
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) {
            throw std::invalid_argument(
                "GpdSampleConfig: seed must be a nonnegative integer");
        }
        config.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("alphas")) {
        config.alphas = j.at("alphas").get<std::vector<double>>();
    }
    if (j.contains("generator_bound") && !j.at("generator_bound").is_null()) {
        config.generator_bound = j.at("generator_bound").get<double>();
    }
    config.validate();
    return config;
}

nlohmann::json GpdSampleConfig::to_json() const {
    nlohmann::json j;
    j["generator"] = spec.to_json();
    j["margins"] = std::string(to_string(margins));
    if (margins == MarginKind::general_alpha) {
        j["alphas"] = alphas;
    }
    j["n"] = n;
    j["seed"] = seed;
    if (generator_bound) {
        j["generator_bound"] = *generator_bound;
    }
    return j;
}

Matrix rank_transform_columns(const Matrix& raw) {
    const std::size_t n = raw.rows();
    const std::size_t d = raw.cols();
    Matrix out(n, d);
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return raw(a, j) < raw(b, j);
        });
        const double denom = static_cast<double>(n) + 1.0;
        std::size_t start = 0;
        while (start < n) {
            std::size_t stop = start + 1;
            while (stop < n && raw(order[stop], j) == raw(order[start], j)) ++stop;
            // 1-based ranks start+1 .. stop averaged across the tie run.
            const double avg_rank = 0.5 * static_cast<double>(start + 1 + stop);
            for (std::size_t k = start; k < stop; ++k) {
                out(order[k], j) = avg_rank / denom;
            }
            start = stop;
        }
    }
    return out;
}

Matrix simulate_simple_gpd(const GpdSampleConfig& config) {
    GpdSampleConfig checked = config;
    checked.validate();
    if (checked.margins != MarginKind::simple_pareto) {
        throw std::invalid_argument("simulate_simple_gpd: margins must be simple_pareto");
    }
    const GeneratorRowSampler sampler(checked.spec);
    const std::size_t d = checked.spec.dim;
    Matrix out(checked.n, d);
    for (std::size_t i = 0; i < checked.n; ++i) {
        SplitMix64 zs = z_stream(checked.seed, i);
        auto row = out.row(i);
        sampler.draw(zs, row);
        const double u = u_stream(checked.seed, i).uniform_open01();
        for (std::size_t j = 0; j < d; ++j) row[j] /= u;
    }
    return out;
}

Matrix simulate_general_gpd(const GpdSampleConfig& config) {
    GpdSampleConfig checked = config;
    checked.validate();
    const std::vector<double> alphas = resolve_alphas(checked);
    const GeneratorRowSampler sampler(checked.spec);
    const std::size_t d = checked.spec.dim;
    Matrix out(checked.n, d);
    for (std::size_t i = 0; i < checked.n; ++i) {
        SplitMix64 zs = z_stream(checked.seed, i);
        auto row = out.row(i);
        sampler.draw(zs, row);
        const double u = u_stream(checked.seed, i).uniform_open01();
        for (std::size_t j = 0; j < d; ++j) {
            // Quantile of the shape-alpha margin at probability 1 - ratio,
            // written directly in terms of ratio = U / Z_j to avoid the
            // cancellation in forming 1 - ratio twice.
            double ratio = u / row[j];
            if (!(ratio <= 1.0 - kQuantileFloor)) ratio = 1.0 - kQuantileFloor;
            const double a = alphas[j];
            if (a == 1.0) {
                row[j] = -ratio;
            } else if (a > 0.0) {
                row[j] = -std::pow(ratio, 1.0 / a);
            } else if (a == 0.0) {
                row[j] = -std::log(ratio);
            } else {
                row[j] = std::pow(ratio, 1.0 / a);
            }
        }
    }
    return out;
}

PseudoSample simulate_copula_scale(const GpdSampleConfig& config) {
    GpdSampleConfig checked = config;
    checked.validate();
    if (checked.margins != MarginKind::copula_scale) {
        throw std::invalid_argument("simulate_copula_scale: margins must be copula_scale");
    }
    const std::size_t d = checked.spec.dim;
    PseudoSample sample;
    switch (checked.spec.family) {
        case GeneratorFamily::constant_one: {
            // V = (1/U, ..., 1/U) has marginal cdf 1 - 1/v, so every
            // component maps to 1 - U exactly.
            sample.matrix = Matrix(checked.n, d);
            for (std::size_t i = 0; i < checked.n; ++i) {
                const double u = u_stream(checked.seed, i).uniform_open01();
                auto row = sample.matrix.row(i);
                for (std::size_t j = 0; j < d; ++j) row[j] = 1.0 - u;
            }
            sample.provenance = PseudoProvenance::simulated;
            sample.exact_gpc = true;
            return sample;
        }
        case GeneratorFamily::permuted_spike: {
            // The spiked component d/U sits on the continuous branch of its
            // cdf 1 - 1/v (v >= d) and maps to 1 - U/d. The zero components
            // sit on the atom at 0 with mass 1 - 1/d; a randomized
            // probability transform spreads them uniformly over that mass.
            sample.matrix = Matrix(checked.n, d);
            const double atom_mass = 1.0 - 1.0 / static_cast<double>(d);
            for (std::size_t i = 0; i < checked.n; ++i) {
                SplitMix64 zs = z_stream(checked.seed, i);
                const auto spike = static_cast<std::size_t>(zs.next() % d);
                SplitMix64 us = u_stream(checked.seed, i);
                const double u = us.uniform_open01();
                auto row = sample.matrix.row(i);
                for (std::size_t j = 0; j < d; ++j) {
                    row[j] = j == spike ? 1.0 - u / static_cast<double>(d)
                                        : us.uniform_open01() * atom_mass;
                }
            }
            sample.provenance = PseudoProvenance::simulated;
            sample.exact_gpc = true;
            return sample;
        }
        case GeneratorFamily::logistic:
        case GeneratorFamily::husler_reiss: {
            GpdSampleConfig raw_config = checked;
            raw_config.margins = MarginKind::simple_pareto;
            sample.matrix = rank_transform_columns(simulate_simple_gpd(raw_config));
            sample.provenance = PseudoProvenance::rank_transform;
            sample.exact_gpc = false;
            return sample;
        }
    }
    throw std::invalid_argument("simulate_copula_scale: unknown family");
}

std::vector<DeltaDiagnosticRow> delta_neighborhood_diagnostic(
    const GeneratorSpec& spec, const std::vector<double>& x_grid, std::size_t n,
    std::uint64_t seed) {
    spec.validate();
    if (x_grid.empty()) {
        throw std::invalid_argument("delta_neighborhood_diagnostic: x_grid is empty");
    }
    for (std::size_t k = 0; k < x_grid.size(); ++k) {
        if (!(x_grid[k] > 1.0)) {
            throw std::invalid_argument(
                "delta_neighborhood_diagnostic: grid values must exceed 1");
        }
        if (k > 0 && !(x_grid[k] > x_grid[k - 1])) {
            throw std::invalid_argument(
                "delta_neighborhood_diagnostic: x_grid must be strictly increasing");
        }
    }
    if (n < 1) {
        throw std::invalid_argument("delta_neighborhood_diagnostic: n must be >= 1");
    }
    const std::size_t d = spec.dim;
    std::vector<DeltaDiagnosticRow> table(x_grid.size());
    if (has_bounded_generator(spec.family)) {
        // P(V_i > x) = E(min(Z_i, x)) / x is exact once Z_i is two-valued:
        // x * P(V_i > x) = 1 beyond the bound and x/bound inside it.
        const double bound = spec.family == GeneratorFamily::constant_one
            ? 1.0 : static_cast<double>(d);
        for (std::size_t k = 0; k < x_grid.size(); ++k) {
            table[k].x = x_grid[k];
            table[k].scaled_survival.assign(d, std::min(1.0, x_grid[k] / bound));
        }
        return table;
    }
    GpdSampleConfig config;
    config.spec = spec;
    config.margins = MarginKind::simple_pareto;
    config.n = n;
    config.seed = seed;
    const Matrix sample = simulate_simple_gpd(config);
    const std::size_t grid_size = x_grid.size();
    for (std::size_t k = 0; k < grid_size; ++k) {
        table[k].x = x_grid[k];
        table[k].scaled_survival.assign(d, 0.0);
    }
    // Bucket each value by how many grid points it exceeds, then turn the
    // per-column histogram into exceedance counts by suffix summation.
    std::vector<std::size_t> histogram(grid_size + 1);
    for (std::size_t j = 0; j < d; ++j) {
        std::fill(histogram.begin(), histogram.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i) {
            const auto exceeded = static_cast<std::size_t>(
                std::lower_bound(x_grid.begin(), x_grid.end(), sample(i, j))
                - x_grid.begin());
            ++histogram[exceeded];
        }
        std::size_t beyond = 0;
        for (std::size_t k = grid_size; k-- > 0;) {
            beyond += histogram[k + 1];
            table[k].scaled_survival[j] =
                x_grid[k] * static_cast<double>(beyond) / static_cast<double>(n);
        }
    }
    return table;
}

void write_sample_csv(const Matrix& sample, std::ostream& out,
                      std::string_view column_prefix) {
    std::string line;
    for (std::size_t j = 0; j < sample.cols(); ++j) {
        if (j > 0) line.push_back(',');
        line.append(column_prefix);
        line.append(std::to_string(j + 1));
    }
    line.push_back('\n');
    out << line;
    for (std::size_t i = 0; i < sample.rows(); ++i) {
        line.clear();
        const auto row = sample.row(i);
        for (std::size_t j = 0; j < sample.cols(); ++j) {
            if (j > 0) line.push_back(',');
            append_double(line, row[j]);
        }
        line.push_back('\n');
        out << line;
    }
}

} // namespace gpc

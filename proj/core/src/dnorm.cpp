#include "gpcopula/dnorm.hpp"

#include "gpcopula/rng.hpp"
#include "gpcopula/special.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace gpc {

std::string_view to_string(GeneratorFamily family) {
    switch (family) {
        case GeneratorFamily::constant_one: return "constant_one";
        case GeneratorFamily::permuted_spike: return "permuted_spike";
        case GeneratorFamily::logistic: return "logistic";
        case GeneratorFamily::husler_reiss: return "husler_reiss";
    }
    throw std::invalid_argument("GeneratorFamily: unknown enumerator");
}

GeneratorFamily generator_family_from_string(std::string_view name) {
    if (name == "constant_one") return GeneratorFamily::constant_one;
    if (name == "permuted_spike") return GeneratorFamily::permuted_spike;
    if (name == "logistic") return GeneratorFamily::logistic;
    if (name == "husler_reiss") return GeneratorFamily::husler_reiss;
    throw std::invalid_argument("GeneratorSpec: unknown family '" + std::string(name) + "'");
}

namespace {

Eigen::MatrixXd sigma_as_eigen(const GeneratorSpec& spec) {
    const auto d = static_cast<Eigen::Index>(spec.dim);
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            m(i, j) = spec.sigma[static_cast<std::size_t>(i * d + j)];
        }
    }
    return m;
}

// Lower-triangular-like factor L with L L^T = sigma. Plain Cholesky when
// sigma is positive definite; otherwise an eigendecomposition with small or
// negative eigenvalues clipped to zero, so rank-deficient covariances (the
// zero matrix included) sample correctly.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.info() != Eigen::Success) {
        throw std::invalid_argument("GeneratorSpec: sigma eigendecomposition failed");
    }
    Eigen::VectorXd values = eig.eigenvalues();
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values(i) = values(i) > 1e-12 * scale ? std::sqrt(values(i)) : 0.0;
    }
    return eig.eigenvectors() * values.asDiagonal();
}

} // namespace

void GeneratorSpec::validate() const {
    if (dim < 1) {
        throw std::invalid_argument("GeneratorSpec: dim must be >= 1");
    }
    switch (family) {
        case GeneratorFamily::logistic:
            if (!(p > 1.0) || !std::isfinite(p)) {
                throw std::invalid_argument("GeneratorSpec: logistic requires finite p > 1");
            }
            if (!sigma.empty()) {
                throw std::invalid_argument("GeneratorSpec: sigma is only valid for husler_reiss");
            }
            return;
        case GeneratorFamily::husler_reiss: {
            if (p != 0.0) {
                throw std::invalid_argument("GeneratorSpec: p is only valid for logistic");
            }
            if (sigma.size() != dim * dim) {
                throw std::invalid_argument(
                    "GeneratorSpec: sigma must be a row-major dim x dim matrix");
            }
            double max_abs = 0.0;
            for (double v : sigma) {
                if (!std::isfinite(v)) {
                    throw std::invalid_argument("GeneratorSpec: sigma has a non-finite entry");
                }
                max_abs = std::max(max_abs, std::fabs(v));
            }
            const double tol = 1e-9 * std::max(1.0, max_abs);
            for (std::size_t i = 0; i < dim; ++i) {
                for (std::size_t j = i + 1; j < dim; ++j) {
                    if (std::fabs(sigma[i * dim + j] - sigma[j * dim + i]) > tol) {
                        throw std::invalid_argument("GeneratorSpec: sigma is not symmetric");
                    }
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_as_eigen(*this));
            if (eig.info() != Eigen::Success) {
                throw std::invalid_argument("GeneratorSpec: sigma eigendecomposition failed");
            }
            const double min_eig = eig.eigenvalues().minCoeff();
            const double eig_scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
            if (min_eig < -1e-9 * eig_scale) {
                throw std::invalid_argument("GeneratorSpec: sigma is not positive semi-definite");
            }
            return;
        }
        case GeneratorFamily::constant_one:
        case GeneratorFamily::permuted_spike:
            if (p != 0.0) {
                throw std::invalid_argument("GeneratorSpec: p is only valid for logistic");
            }
            if (!sigma.empty()) {
                throw std::invalid_argument("GeneratorSpec: sigma is only valid for husler_reiss");
            }
            return;
    }
    throw std::invalid_argument("GeneratorSpec: unknown family");
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("GeneratorSpec: expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "family" && key != "dim" && key != "p" && key != "sigma") {
            throw std::invalid_argument("GeneratorSpec: unknown field '" + key + "'");
        }
    }
    if (!j.contains("family") || !j.at("family").is_string()) {
        throw std::invalid_argument("GeneratorSpec: missing string field 'family'");
    }
    if (!j.contains("dim") || !j.at("dim").is_number_integer()) {
        throw std::invalid_argument("GeneratorSpec: missing integer field 'dim'");
    }
    GeneratorSpec spec;
    spec.family = generator_family_from_string(j.at("family").get<std::string>());
    const auto dim_raw = j.at("dim").get<std::int64_t>();
    if (dim_raw < 1) {
        throw std::invalid_argument("GeneratorSpec: dim must be >= 1");
    }
    spec.dim = static_cast<std::size_t>(dim_raw);
    if (j.contains("p")) {
        if (!j.at("p").is_number()) {
            throw std::invalid_argument("GeneratorSpec: field 'p' must be a number");
        }
        spec.p = j.at("p").get<double>();
    }
    if (j.contains("sigma")) {
        const auto& rows = j.at("sigma");
        if (!rows.is_array() || rows.size() != spec.dim) {
            throw std::invalid_argument(
                "GeneratorSpec: sigma must be an array of dim rows");
        }
        spec.sigma.reserve(spec.dim * spec.dim);
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != spec.dim) {
                throw std::invalid_argument(
                    "GeneratorSpec: each sigma row must hold dim numbers");
            }
            for (const auto& v : row) {
                if (!v.is_number()) {
                    throw std::invalid_argument("GeneratorSpec: sigma entries must be numbers");
                }
                spec.sigma.push_back(v.get<double>());
            }
        }
    }
    spec.validate();
    return spec;
}

nlohmann::json GeneratorSpec::to_json() const {
    validate();
    nlohmann::json j;
    j["family"] = std::string(to_string(family));
    j["dim"] = dim;
    if (family == GeneratorFamily::logistic) {
        j["p"] = p;
    }
    if (family == GeneratorFamily::husler_reiss) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < dim; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < dim; ++k) {
                row.push_back(sigma[i * dim + k]);
            }
            rows.push_back(std::move(row));
        }
        j["sigma"] = std::move(rows);
    }
    return j;
}

GeneratorRowSampler::GeneratorRowSampler(GeneratorSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const std::size_t d = spec_.dim;
    switch (spec_.family) {
        case GeneratorFamily::logistic:
            logistic_inv_p_ = 1.0 / spec_.p;
            logistic_scale_ = 1.0 / gamma_function(1.0 - logistic_inv_p_);
            break;
        case GeneratorFamily::husler_reiss: {
            const Eigen::MatrixXd factor = covariance_factor(sigma_as_eigen(spec_));
            factor_.resize(d * d);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    factor_[i * d + j] = factor(static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(j));
                }
            }
            break;
        }
        default:
            break;
    }
}

void GeneratorRowSampler::draw(SplitMix64& rng, std::span<double> out) const {
    const std::size_t d = spec_.dim;
    switch (spec_.family) {
        case GeneratorFamily::constant_one: {
            for (std::size_t j = 0; j < d; ++j) out[j] = 1.0;
            return;
        }
        case GeneratorFamily::permuted_spike: {
            for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
            out[static_cast<std::size_t>(rng.next() % d)] = static_cast<double>(d);
            return;
        }
        case GeneratorFamily::logistic: {
            for (std::size_t j = 0; j < d; ++j) {
                // Frechet draw by inverse cdf, then normalized to mean 1.
                out[j] = std::pow(-std::log(rng.uniform_open01()), -logistic_inv_p_)
                    * logistic_scale_;
            }
            return;
        }
        case GeneratorFamily::husler_reiss: {
            // out holds the normal draws first, then x = factor * g is folded
            // into the lognormal transform column by column.
            std::vector<double> g(d);
            for (std::size_t j = 0; j < d; ++j) g[j] = rng.standard_normal();
            for (std::size_t i = 0; i < d; ++i) {
                double x = 0.0;
                for (std::size_t j = 0; j < d; ++j) x += factor_[i * d + j] * g[j];
                out[i] = std::exp(x - 0.5 * spec_.sigma[i * d + i]);
            }
            return;
        }
    }
    throw std::invalid_argument("GeneratorRowSampler: unknown family");
}

Matrix sample_generator(const GeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample_generator: n must be >= 1");
    }
    const GeneratorRowSampler sampler(spec);
    Matrix out(n, spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng = SplitMix64::substream(seed, i);
        sampler.draw(rng, out.row(i));
    }
    return out;
}

namespace {

std::optional<ClosedFormNorm> detect_closed_form(const GeneratorSpec& spec) {
    switch (spec.family) {
        case GeneratorFamily::constant_one:
            return ClosedFormNorm{ClosedFormNorm::Kind::sup, 0.0};
        case GeneratorFamily::permuted_spike:
            return ClosedFormNorm{ClosedFormNorm::Kind::l1, 0.0};
        case GeneratorFamily::logistic:
            return ClosedFormNorm{ClosedFormNorm::Kind::logistic, spec.p};
        case GeneratorFamily::husler_reiss:
            return std::nullopt;
    }
    return std::nullopt;
}

void require_dim(const DNormHandle& handle, std::span<const double> x, const char* where) {
    if (x.size() != handle.dim()) {
        throw std::invalid_argument(std::string(where) + ": vector length "
            + std::to_string(x.size()) + " does not match generator dim "
            + std::to_string(handle.dim()));
    }
}

double closed_form_value(const ClosedFormNorm& cf, std::span<const double> x) {
    switch (cf.kind) {
        case ClosedFormNorm::Kind::sup: {
            double m = 0.0;
            for (double v : x) m = std::max(m, std::fabs(v));
            return m;
        }
        case ClosedFormNorm::Kind::l1: {
            double s = 0.0;
            for (double v : x) s += std::fabs(v);
            return s;
        }
        case ClosedFormNorm::Kind::logistic: {
            double s = 0.0;
            for (double v : x) s += std::pow(std::fabs(v), cf.p);
            return std::pow(s, 1.0 / cf.p);
        }
    }
    throw std::logic_error("closed_form_value: unknown kind");
}

template <typename Reduce>
McEstimate mc_reduce(const DNormHandle& handle, std::span<const double> x, Reduce reduce) {
    const Matrix& sample = handle.generator_sample();
    const std::size_t n = sample.rows();
    const std::size_t d = sample.cols();
    std::vector<double> ax(d);
    for (std::size_t j = 0; j < d; ++j) ax[j] = std::fabs(x[j]);
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = reduce(ax.data(), sample.row(i).data(), d);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    double variance = 0.0;
    if (n > 1) {
        variance = (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
        variance = std::max(variance, 0.0);
    }
    return {mean, std::sqrt(variance / static_cast<double>(n)), n};
}

double row_max(const double* ax, const double* z, std::size_t d) {
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) m = std::max(m, ax[j] * z[j]);
    return m;
}

double row_min(const double* ax, const double* z, std::size_t d) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) m = std::min(m, ax[j] * z[j]);
    return m;
}

} // namespace

DNormHandle::DNormHandle(GeneratorSpec spec, McConfig mc)
    : spec_(std::move(spec)), mc_(mc), closed_form_(detect_closed_form(spec_)) {
    spec_.validate();
    if (mc_.sample_count < 2) {
        throw std::invalid_argument("DNormHandle: sample_count must be >= 2");
    }
    sample_ = sample_generator(spec_, mc_.sample_count, mc_.rng_seed);
}

double eval_dnorm(const DNormHandle& handle, std::span<const double> x) {
    require_dim(handle, x, "eval_dnorm");
    if (const auto cf = handle.closed_form()) {
        return closed_form_value(*cf, x);
    }
    return eval_dnorm_mc(handle, x).value;
}

McEstimate eval_dnorm_mc(const DNormHandle& handle, std::span<const double> x) {
    require_dim(handle, x, "eval_dnorm_mc");
    return mc_reduce(handle, x, row_max);
}

double eval_dual(const DNormHandle& handle, std::span<const double> x) {
    require_dim(handle, x, "eval_dual");
    switch (handle.spec().family) {
        case GeneratorFamily::constant_one: {
            double m = std::numeric_limits<double>::infinity();
            for (double v : x) m = std::min(m, std::fabs(v));
            return m;
        }
        case GeneratorFamily::permuted_spike:
            // Some coordinate of Z is zero whenever d >= 2, so the min vanishes.
            if (handle.dim() >= 2) return 0.0;
            return std::fabs(x[0]);
        default:
            return eval_dual_mc(handle, x).value;
    }
}

McEstimate eval_dual_mc(const DNormHandle& handle, std::span<const double> x) {
    require_dim(handle, x, "eval_dual_mc");
    return mc_reduce(handle, x, row_min);
}

double dual_via_inclusion_exclusion(const DNormHandle& handle, std::span<const double> x) {
    require_dim(handle, x, "dual_via_inclusion_exclusion");
    const std::size_t d = handle.dim();
    if (d > 20) {
        throw std::length_error(
            "dual_via_inclusion_exclusion: dim > 20 would need 2^dim - 1 norm evaluations");
    }
    for (double v : x) {
        if (!(v >= 0.0)) {
            throw std::invalid_argument(
                "dual_via_inclusion_exclusion: components must be nonnegative");
        }
    }
    std::vector<double> masked(d);
    double total = 0.0;
    const std::uint32_t limit = static_cast<std::uint32_t>(1u) << d;
    for (std::uint32_t mask = 1; mask < limit; ++mask) {
        for (std::size_t j = 0; j < d; ++j) {
            masked[j] = (mask >> j) & 1u ? x[j] : 0.0;
        }
        const double sign = (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0;
        total += sign * eval_dnorm(handle, masked);
    }
    return total;
}

} // namespace gpc

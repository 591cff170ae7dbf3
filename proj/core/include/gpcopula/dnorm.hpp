#pragma once

#include "gpcopula/matrix.hpp"
#include "gpcopula/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gpc {

enum class GeneratorFamily { constant_one, permuted_spike, logistic, husler_reiss };

std::string_view to_string(GeneratorFamily family);
GeneratorFamily generator_family_from_string(std::string_view name);

// Description of a nonnegative random vector Z with E(Z_i) = 1 per component.
// Families:
//   constant_one   Z = (1,...,1); induced norm is the sup-norm.
//   permuted_spike Z = random permutation of (d,0,...,0); induced norm is L1.
//   logistic       Z = Y / Gamma(1 - 1/p), Y iid Frechet with shape p > 1;
//                  induced norm is the p-norm.
//   husler_reiss   Z_i = exp(X_i - sigma_ii / 2), X centered normal with
//                  covariance sigma; no closed-form norm in general.
struct GeneratorSpec {
    GeneratorFamily family = GeneratorFamily::constant_one;
    std::size_t dim = 1;
    double p = 0.0;             // logistic only; must be > 1
    std::vector<double> sigma;  // husler_reiss only; row-major dim x dim, PSD

    // Throws std::invalid_argument naming the offending parameter.
    void validate() const;

    static GeneratorSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct McConfig {
    std::size_t sample_count = 100000;
    std::uint64_t rng_seed = 0;
};

struct ClosedFormNorm {
    enum class Kind { sup, l1, logistic };
    Kind kind = Kind::sup;
    double p = 0.0;  // set for logistic
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t sample_count = 0;
};

// Draws n iid rows of Z. Row i is generated from an RNG substream keyed by
// (seed, i), so any prefix of rows is independent of n and of how callers
// partition the index range.
Matrix sample_generator(const GeneratorSpec& spec, std::size_t n, std::uint64_t seed);

// Row-at-a-time generator sampling for callers that manage their own RNG
// substreams. Family preparation work (normalization constants, covariance
// factorization) happens once at construction.
class GeneratorRowSampler {
public:
    explicit GeneratorRowSampler(GeneratorSpec spec);

    const GeneratorSpec& spec() const noexcept { return spec_; }

    // Fills out (length dim) with one draw of Z, consuming rng.
    void draw(SplitMix64& rng, std::span<double> out) const;

private:
    GeneratorSpec spec_;
    double logistic_inv_p_ = 0.0;
    double logistic_scale_ = 0.0;
    std::vector<double> factor_;  // row-major lower factor of sigma
};

// Immutable handle bundling a generator spec with the Monte Carlo sample that
// backs every simulation-based evaluation through it. All evaluations share
// the one sample (common random numbers), so scaling identities and subset
// identities hold draw by draw, not just in expectation.
class DNormHandle {
public:
    explicit DNormHandle(GeneratorSpec spec, McConfig mc = {});

    const GeneratorSpec& spec() const noexcept { return spec_; }
    const McConfig& mc_config() const noexcept { return mc_; }
    std::optional<ClosedFormNorm> closed_form() const noexcept { return closed_form_; }
    const Matrix& generator_sample() const noexcept { return sample_; }
    std::size_t dim() const noexcept { return spec_.dim; }

private:
    GeneratorSpec spec_;
    McConfig mc_;
    std::optional<ClosedFormNorm> closed_form_;
    Matrix sample_;
};

// E(max_i |x_i| Z_i): closed form when the family has one, Monte Carlo mean
// over the handle's shared sample otherwise.
double eval_dnorm(const DNormHandle& handle, std::span<const double> x);

// Monte Carlo path regardless of closed-form availability, with the standard
// error of the mean attached.
McEstimate eval_dnorm_mc(const DNormHandle& handle, std::span<const double> x);

// E(min_i |x_i| Z_i): closed form for constant_one (min_i |x_i|) and for
// permuted_spike with d >= 2 (identically 0), Monte Carlo otherwise.
double eval_dual(const DNormHandle& handle, std::span<const double> x);

McEstimate eval_dual_mc(const DNormHandle& handle, std::span<const double> x);

// Alternating sum of eval_dnorm over the 2^d - 1 nonempty coordinate subsets
// of x. Requires x >= 0 componentwise and dim <= 20. Agrees with eval_dual
// exactly when both sides run on the handle's shared sample, and analytically
// for closed-form norms.
double dual_via_inclusion_exclusion(const DNormHandle& handle, std::span<const double> x);

} // namespace gpc

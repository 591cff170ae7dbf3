#pragma once

namespace gpc {

// Gamma function. Poles at 0, -1, -2, ... raise std::domain_error.
double gamma_function(double x);

// log(Gamma(x)) for x > 0.
double log_gamma(double x);

// Standard normal distribution function and its inverse. The inverse requires
// p in (0,1).
double normal_cdf(double x);
double normal_quantile(double p);

// Regularized incomplete beta function I_x(a,b); a, b > 0, x in [0,1].
double regularized_incomplete_beta(double a, double b, double x);

// Quantile of the Beta(a,b) distribution, solved to absolute tolerance 1e-10.
double beta_quantile(double p, double a, double b);

// Survival function of the Kolmogorov distribution,
// P(sup_t |B(t)| > lambda) for a Brownian bridge B.
double kolmogorov_sf(double lambda);

// Limiting distribution function of the Cramer-von Mises statistic.
double cvm_limiting_cdf(double x);

// Modified Bessel function of the second kind of order 1/4, scaled:
// exp(z) * K_{1/4}(z), z > 0. Needed by cvm_limiting_cdf.
double bessel_k_quarter_scaled(double z);

} // namespace gpc

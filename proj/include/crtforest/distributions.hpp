#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "crtforest/rng.hpp"

namespace crt::stats {

// Special functions. Continued fractions use the modified Lentz algorithm.

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);
/// Regularized incomplete beta I_x(a, b).
double regularized_beta(double x, double a, double b);

// Distribution functions. All throw DomainError for invalid parameters.

double gamma_cdf(double x, double shape, double scale);
double gamma_sf(double x, double shape, double scale);
double gamma_pdf(double x, double shape, double scale);
double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);
double rayleigh_cdf(double x, double scale);

/// Inverse CDFs by safeguarded Newton iteration on the matching tail.
/// Require 0 < p < 1 and positive parameters; throw DomainError otherwise.
double gamma_quantile(double p, double shape, double scale);
double chi2_quantile(double p, double df);
double f_quantile(double p, double df1, double df2);

// Samplers.

double sample_exponential(double mean, RngStream& rng);
double sample_normal(RngStream& rng);
/// Marsaglia-Tsang; shape < 1 via the U^{1/shape} boost.
double sample_gamma(double shape, double scale, RngStream& rng);
/// Inverse transform: scale * sqrt(-2 ln U).
double sample_rayleigh(double scale, RngStream& rng);
std::uint64_t sample_binomial(std::uint64_t trials, double p, RngStream& rng);
/// Failures before the first success, P(k) = p (1-p)^k.
std::uint64_t sample_geometric(double p, RngStream& rng);

// Goodness-of-fit helpers, used by the calibration harness and the tests.

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test (asymptotic p-value with Stephens'
/// small-sample correction). The sample is copied and sorted.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_sf(double lambda);

struct Chi2GofResult {
  double statistic;
  double df;
  double p_value;
};

/// Pearson chi-square goodness of fit of counts against cell probabilities.
Chi2GofResult chi2_gof(std::span<const std::uint64_t> observed, std::span<const double> probabilities);

}  // namespace crt::stats

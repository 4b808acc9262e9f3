#include "crtforest/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "crtforest/errors.hpp"

namespace crt::stats {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 1'000'000;

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

double log_gamma(double x) { return std::lgamma(x); }

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// x^a e^{-x} / Gamma(a), in log space.
double log_gamma_prefactor(double a, double x) { return a * std::log(x) - x - log_gamma(a); }

double gamma_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIterations; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_gamma_prefactor(a, x));
}

double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_gamma_prefactor(a, x)) * h;
}

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

// Rough standard normal quantile (Abramowitz & Stegun 26.2.23); only used to
// seed Newton iterations.
double normal_quantile_guess(double p) {
  const double q = p < 0.5 ? p : 1.0 - p;
  const double t = std::sqrt(-2.0 * std::log(q));
  const double z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                           (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
  return p < 0.5 ? -z : z;
}

struct Tails {
  std::function<double(double)> cdf;
  std::function<double(double)> sf;
  std::function<double(double)> pdf;
};

// Solves F(x) = p on (0, inf) using whichever tail is smaller, keeping a
// bracket so a wild Newton step falls back to bisection.
double solve_quantile(double p, const Tails& tails, double guess) {
  const bool upper = p > 0.5;
  const double target = upper ? 1.0 - p : p;
  auto excess = [&](double x) { return upper ? target - tails.sf(x) : tails.cdf(x) - target; };

  double lo = 0.0;
  double hi = std::max(guess, 1e-300) ;
  while (excess(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw DomainError("quantile search diverged");
  }
  double x = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
  for (int i = 0; i < 500; ++i) {
    const double g = excess(x);
    if (g == 0.0) return x;
    if (g < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double density = tails.pdf(x);
    double next = density > 0.0 ? x - g / density : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4 * kEps * next || hi - lo <= 4 * kEps * hi) return next;
    x = next;
  }
  return x;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  require(a > 0.0 && x >= 0.0, "incomplete gamma needs a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  require(a > 0.0 && x >= 0.0, "incomplete gamma needs a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_series(a, x);
  return gamma_continued_fraction(a, x);
}

double regularized_beta(double x, double a, double b) {
  require(a > 0.0 && b > 0.0 && x >= 0.0 && x <= 1.0, "incomplete beta needs a, b > 0, 0 <= x <= 1");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double gamma_cdf(double x, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "gamma needs positive shape and scale");
  return x <= 0.0 ? 0.0 : regularized_gamma_p(shape, x / scale);
}

double gamma_sf(double x, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "gamma needs positive shape and scale");
  return x <= 0.0 ? 1.0 : regularized_gamma_q(shape, x / scale);
}

double gamma_pdf(double x, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "gamma needs positive shape and scale");
  if (x < 0.0) return 0.0;
  if (x == 0.0) return shape == 1.0 ? 1.0 / scale : (shape < 1.0 ? INFINITY : 0.0);
  return std::exp((shape - 1.0) * std::log(x / scale) - x / scale - log_gamma(shape)) / scale;
}

double chi2_cdf(double x, double df) {
  require(df > 0.0, "chi-square needs df > 0");
  return gamma_cdf(x, 0.5 * df, 2.0);
}

double chi2_sf(double x, double df) {
  require(df > 0.0, "chi-square needs df > 0");
  return gamma_sf(x, 0.5 * df, 2.0);
}

double f_cdf(double x, double df1, double df2) {
  require(df1 > 0.0 && df2 > 0.0, "F needs positive degrees of freedom");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  // I_{d1 x / (d1 x + d2)}(d1/2, d2/2), written via its complement for large x.
  const double u = df1 * x;
  if (u <= df2) return regularized_beta(u / (u + df2), 0.5 * df1, 0.5 * df2);
  return 1.0 - regularized_beta(df2 / (u + df2), 0.5 * df2, 0.5 * df1);
}

double f_sf(double x, double df1, double df2) {
  require(df1 > 0.0 && df2 > 0.0, "F needs positive degrees of freedom");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double u = df1 * x;
  if (u > df2) return regularized_beta(df2 / (u + df2), 0.5 * df2, 0.5 * df1);
  return 1.0 - regularized_beta(u / (u + df2), 0.5 * df1, 0.5 * df2);
}

namespace {

double f_pdf(double x, double df1, double df2) {
  if (x <= 0.0) return 0.0;
  const double log_pdf = 0.5 * (df1 * std::log(df1) + df2 * std::log(df2)) +
                         (0.5 * df1 - 1.0) * std::log(x) -
                         0.5 * (df1 + df2) * std::log(df2 + df1 * x) - log_beta(0.5 * df1, 0.5 * df2);
  return std::exp(log_pdf);
}

}  // namespace

double rayleigh_cdf(double x, double scale) {
  require(scale > 0.0, "Rayleigh needs a positive scale");
  return x <= 0.0 ? 0.0 : -std::expm1(-x * x / (2.0 * scale * scale));
}

double gamma_quantile(double p, double shape, double scale) {
  require(p > 0.0 && p < 1.0, "quantile needs 0 < p < 1");
  require(shape > 0.0 && scale > 0.0, "gamma needs positive shape and scale");
  // Wilson-Hilferty seed for the chi-square with 2*shape degrees of freedom.
  const double df = 2.0 * shape;
  const double z = normal_quantile_guess(p);
  const double w = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  double guess = w > 0.0 ? 0.5 * df * w * w * w : 0.5 * df * std::pow(p, 1.0 / shape);
  const Tails tails{[&](double x) { return regularized_gamma_p(shape, x); },
                    [&](double x) { return regularized_gamma_q(shape, x); },
                    [&](double x) { return gamma_pdf(x, shape, 1.0); }};
  return scale * solve_quantile(p, tails, guess);
}

double chi2_quantile(double p, double df) {
  require(df > 0.0, "chi-square needs df > 0");
  return gamma_quantile(p, 0.5 * df, 2.0);
}

double f_quantile(double p, double df1, double df2) {
  require(p > 0.0 && p < 1.0, "quantile needs 0 < p < 1");
  require(df1 > 0.0 && df2 > 0.0, "F needs positive degrees of freedom");
  // Seed from the ratio of Wilson-Hilferty chi-square quantiles at the median
  // shifted by p; the bracket takes care of the rest.
  const double z = normal_quantile_guess(p);
  const double s = std::sqrt(2.0 / df1 + 2.0 / df2);
  const double guess = std::exp(z * s);
  const Tails tails{[&](double x) { return f_cdf(x, df1, df2); },
                    [&](double x) { return f_sf(x, df1, df2); },
                    [&](double x) { return f_pdf(x, df1, df2); }};
  return solve_quantile(p, tails, guess);
}

// ---------------------------------------------------------------------------
// Samplers

double sample_exponential(double mean, RngStream& rng) {
  require(mean > 0.0, "exponential needs a positive mean");
  return -mean * std::log(rng.uniform());
}

double sample_normal(RngStream& rng) {
  const double r = std::sqrt(-2.0 * std::log(rng.uniform()));
  return r * std::cos(2.0 * std::numbers::pi * rng.uniform());
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  require(shape > 0.0 && scale > 0.0, "gamma needs positive shape and scale");
  if (shape < 1.0) {
    const double boost = std::pow(rng.uniform(), 1.0 / shape);
    return sample_gamma(shape + 1.0, scale, rng) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

double sample_rayleigh(double scale, RngStream& rng) {
  require(scale > 0.0, "Rayleigh needs a positive scale");
  return scale * std::sqrt(-2.0 * std::log(rng.uniform()));
}

std::uint64_t sample_binomial(std::uint64_t trials, double p, RngStream& rng) {
  require(p >= 0.0 && p <= 1.0, "binomial needs 0 <= p <= 1");
  if (trials == 0 || p == 0.0) return 0;
  if (p == 1.0) return trials;
  std::binomial_distribution<std::uint64_t> dist(trials, p);
  return dist(rng);
}

std::uint64_t sample_geometric(double p, RngStream& rng) {
  require(p > 0.0 && p <= 1.0, "geometric needs 0 < p <= 1");
  if (p == 1.0) return 0;
  return static_cast<std::uint64_t>(std::floor(std::log(rng.uniform()) / std::log1p(-p)));
}

// ---------------------------------------------------------------------------
// Goodness of fit

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form of the Kolmogorov CDF.
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double sum = 0.0;
    for (int k = 1; k < 50; k += 2) sum += std::pow(y, k * k);
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-20) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  require(!sample.empty(), "KS test needs a non-empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double root_n = std::sqrt(n);
  return {d, kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d)};
}

Chi2GofResult chi2_gof(std::span<const std::uint64_t> observed, std::span<const double> probabilities) {
  require(observed.size() == probabilities.size() && observed.size() >= 2,
          "chi-square GOF needs matching cells, at least two");
  double total = 0.0;
  for (const auto o : observed) total += static_cast<double>(o);
  require(total > 0.0, "chi-square GOF needs observations");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = total * probabilities[i];
    require(expected > 0.0, "chi-square GOF needs positive cell probabilities");
    const double diff = static_cast<double>(observed[i]) - expected;
    stat += diff * diff / expected;
  }
  const double df = static_cast<double>(observed.size() - 1);
  return {stat, df, chi2_sf(stat, df)};
}

}  // namespace crt::stats

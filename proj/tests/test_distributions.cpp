#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "crtforest/distributions.hpp"
#include "crtforest/errors.hpp"
#include "test_util.hpp"

namespace st = crt::stats;

namespace {

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

}  // namespace

TEST_CASE("closed-form quantiles") {
  // chi2(2) is exponential with mean 2; F(2, 2) has cdf x / (1 + x).
  CHECK(rel_close(st::chi2_quantile(0.99, 2), 9.210340371976184, 1e-9));
  CHECK(rel_close(st::f_quantile(0.95, 2, 2), 19.0, 1e-9));
  for (const double p : {1e-10, 1e-4, 0.01, 0.3, 0.5, 0.9, 0.999, 1 - 1e-10}) {
    CHECK(rel_close(st::chi2_quantile(p, 2), -2 * std::log1p(-p), 1e-9));
    CHECK(rel_close(st::f_quantile(p, 2, 2), p / (1 - p), 1e-9));
    CHECK(rel_close(st::gamma_quantile(p, 1, 3), -3 * std::log1p(-p), 1e-9));
  }
}

TEST_CASE("quantiles invert their cdf") {
  const double probs[] = {1e-8, 1e-3, 0.025, 0.5, 0.975, 0.995, 1 - 1e-8};
  for (const double df : {0.5, 1.0, 2.0, 7.0, 50.0, 200.0, 5000.0, 50000.0}) {
    for (const double p : probs) {
      const double q = st::chi2_quantile(p, df);
      CHECK(std::abs(st::chi2_cdf(q, df) - p) <= 1e-9 * std::min(p, 1 - p) + 1e-15);
    }
  }
  for (const double d1 : {1.0, 2.0, 10.0, 200.0, 50000.0}) {
    for (const double d2 : {1.0, 3.0, 50.0, 2000.0, 50000.0}) {
      for (const double p : probs) {
        const double q = st::f_quantile(p, d1, d2);
        CHECK(std::abs(st::f_cdf(q, d1, d2) - p) <= 1e-9 * std::min(p, 1 - p) + 1e-15);
      }
    }
  }
}

TEST_CASE("special functions agree with an independent implementation") {
  for (const double a : {0.1, 0.5, 1.0, 2.5, 25.0, 300.0, 25000.0}) {
    for (const double x : {1e-3, 0.1, 1.0, 2.0, 10.0, 30.0, 250.0, 24000.0, 26000.0}) {
      CHECK(rel_close(st::regularized_gamma_p(a, x) + 1e-300, boost::math::gamma_p(a, x) + 1e-300, 1e-10));
      CHECK(rel_close(st::regularized_gamma_q(a, x) + 1e-300, boost::math::gamma_q(a, x) + 1e-300, 1e-10));
    }
  }
  for (const double a : {0.5, 1.0, 4.0, 100.0, 25000.0}) {
    for (const double b : {0.5, 2.0, 30.0, 25000.0}) {
      for (const double x : {1e-4, 0.1, 0.5, 0.9, 0.9999}) {
        CHECK(rel_close(st::regularized_beta(x, a, b) + 1e-300, boost::math::ibeta(a, b, x) + 1e-300,
                        1e-10));
      }
    }
  }
  for (const double df : {3.0, 50.0, 50000.0}) {
    const boost::math::chi_squared chi(df);
    const boost::math::fisher_f f(df, 2 * df);
    for (const double p : {0.005, 0.5, 0.99}) {
      CHECK(rel_close(st::chi2_quantile(p, df), boost::math::quantile(chi, p), 1e-9));
      CHECK(rel_close(st::f_quantile(p, df, 2 * df), boost::math::quantile(f, p), 1e-9));
    }
  }
  const boost::math::gamma_distribution<> g(25, 2);
  CHECK(rel_close(st::gamma_pdf(40, 25, 2), boost::math::pdf(g, 40.0), 1e-10));
  CHECK(rel_close(st::gamma_sf(70, 25, 2), boost::math::cdf(boost::math::complement(g, 70.0)), 1e-10));
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(st::chi2_quantile(0.0, 2), crt::DomainError);
  CHECK_THROWS_AS(st::chi2_quantile(1.0, 2), crt::DomainError);
  CHECK_THROWS_AS(st::chi2_quantile(0.5, 0), crt::DomainError);
  CHECK_THROWS_AS(st::f_quantile(0.5, 1, -1), crt::DomainError);
  CHECK_THROWS_AS(st::gamma_cdf(1, -1, 1), crt::DomainError);
  CHECK_THROWS_AS(st::f_quantile(std::nan(""), 1, 1), crt::DomainError);
  CHECK(st::chi2_cdf(-1.0, 3) == 0.0);
  CHECK(st::chi2_sf(-1.0, 3) == 1.0);
}

TEST_CASE("random streams are reproducible and distinct") {
  crt::RngStream a(5, 3);
  crt::RngStream b(5, 3);
  crt::RngStream c(5, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs = differs || x != c();
  }
  CHECK(differs);
  const crt::RngStream base(9, 0);
  auto s1 = base.substream(1);
  auto s1again = base.substream(1);
  auto s2 = base.substream(2);
  CHECK(s1() == s1again());
  CHECK(s1() != s2());
  crt::RngStream r(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.below(7) < 7);
  }
}

TEST_CASE("sampler moments") {
  crt::RngStream rng(21, 0);
  const int n = 200000;
  std::vector<double> e, z, g, gs, bin, geo;
  for (int i = 0; i < n; ++i) {
    e.push_back(st::sample_exponential(2.0, rng));
    z.push_back(st::sample_normal(rng));
    g.push_back(st::sample_gamma(25.0, 2.0, rng));
    gs.push_back(st::sample_gamma(0.3, 1.0, rng));
    bin.push_back(static_cast<double>(st::sample_binomial(1000, 0.3, rng)));
    geo.push_back(static_cast<double>(st::sample_geometric(0.25, rng)));
  }
  // Tolerances are about five standard errors.
  CHECK(testutil::mean(e) == doctest::Approx(2.0).epsilon(0.012));
  CHECK(std::abs(testutil::mean(z)) < 0.012);
  CHECK(testutil::variance(z) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(testutil::mean(g) == doctest::Approx(50.0).epsilon(0.003));
  CHECK(testutil::variance(g) == doctest::Approx(100.0).epsilon(0.02));
  CHECK(testutil::mean(gs) == doctest::Approx(0.3).epsilon(0.02));
  CHECK(testutil::mean(bin) == doctest::Approx(300.0).epsilon(0.001));
  CHECK(testutil::variance(bin) == doctest::Approx(210.0).epsilon(0.02));
  CHECK(testutil::mean(geo) == doctest::Approx(3.0).epsilon(0.015));
  CHECK(st::sample_binomial(0, 0.5, rng) == 0);
  CHECK(st::sample_binomial(10, 1.0, rng) == 10);
}

TEST_CASE("samplers pass goodness-of-fit tests") {
  crt::RngStream rng(22, 0);
  std::vector<double> ray, gam, gsmall;
  for (int i = 0; i < 20000; ++i) {
    ray.push_back(st::sample_rayleigh(std::sqrt(2.0), rng));
    gam.push_back(st::sample_gamma(25.0, 2.0, rng));
    gsmall.push_back(st::sample_gamma(0.4, 1.5, rng));
  }
  CHECK(st::ks_test(ray, [](double x) { return st::rayleigh_cdf(x, std::sqrt(2.0)); }).p_value > 0.001);
  CHECK(st::ks_test(gam, [](double x) { return st::gamma_cdf(x, 25, 2); }).p_value > 0.001);
  CHECK(st::ks_test(gsmall, [](double x) { return st::gamma_cdf(x, 0.4, 1.5); }).p_value > 0.001);
  // A wrong scale is detected.
  CHECK(st::ks_test(ray, [](double x) { return st::rayleigh_cdf(x, 1.3); }).p_value < 1e-6);

  std::uint64_t counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 40000; ++i) ++counts[st::sample_binomial(3, 0.5, rng)];
  const double probs[] = {0.125, 0.375, 0.375, 0.125};
  CHECK(st::chi2_gof(counts, probs).p_value > 0.001);
}

TEST_CASE("goodness-of-fit helpers") {
  CHECK(st::kolmogorov_sf(0.0) == 1.0);
  CHECK(st::kolmogorov_sf(1.3580986393) == doctest::Approx(0.05).epsilon(1e-6));
  const std::uint64_t counts[] = {50, 50};
  const double probs[] = {0.5, 0.5};
  const auto r = st::chi2_gof(counts, probs);
  CHECK(r.statistic == 0.0);
  CHECK(r.df == 1.0);
  CHECK(r.p_value == doctest::Approx(1.0));
}

#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "crtforest/distributions.hpp"
#include "crtforest/errors.hpp"
#include "crtforest/generators.hpp"
#include "crtforest/inference.hpp"
#include "test_util.hpp"

using crt::Tree;
using crt::TreeSummary;
namespace st = crt::stats;

namespace {

// Binary tree with k leaves and a stem, every edge of length s / (2k - 1).
Tree caterpillar(std::size_t k, double s) {
  std::vector<std::uint32_t> degrees{1};
  for (std::size_t i = 1; i < k; ++i) {
    degrees.push_back(2);
    degrees.push_back(0);
  }
  degrees.push_back(0);
  const std::vector<double> lengths(2 * k - 1, s / static_cast<double>(2 * k - 1));
  return Tree::from_preorder(degrees, lengths);
}

// Summaries drawn from the limit law: W sigma ~ Rayleigh(1), S^2 sigma^2 ~ Gamma(k, 2).
std::vector<TreeSummary> limit_summaries(std::size_t p, std::size_t k, double sigma2, crt::RngStream& rng) {
  std::vector<TreeSummary> out(p);
  for (auto& t : out) {
    t.n = 1000;
    t.n_leaves = 400;
    t.k = k;
    t.w = st::sample_rayleigh(1.0 / std::sqrt(sigma2), rng);
    t.s = std::sqrt(st::sample_gamma(static_cast<double>(k), 2.0 / sigma2, rng));
  }
  return out;
}

std::vector<Tree> poisson_trees(std::size_t count, std::size_t k, double theta, crt::RngStream& rng) {
  std::vector<Tree> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(crt::sample_poisson_binary(k, theta, rng));
  return out;
}

// Simpson's rule on [0, hi].
template <class F>
double integrate(F f, double hi, int intervals = 20000) {
  const double h = hi / intervals;
  double sum = f(0.0) + f(hi);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0;
}

double binomial_upper(double alpha, int trials) { return alpha + 4.0 * std::sqrt(alpha * (1 - alpha) / trials); }

}  // namespace

TEST_CASE("leaf specs") {
  CHECK(crt::LeafSpec::count(25).leaves_for(100) == 25);
  CHECK(crt::LeafSpec::count(25).leaves_for(10) == 10);
  CHECK(crt::LeafSpec::fraction(0.1).leaves_for(104) == 10);
  CHECK(crt::LeafSpec::fraction(0.1).leaves_for(3) == 1);
  CHECK_THROWS_AS(crt::LeafSpec::fraction(0.0), crt::DomainError);
  CHECK_THROWS_AS(crt::LeafSpec::fraction(1.5), crt::DomainError);
}

TEST_CASE("binary density values") {
  // k = 1: a single edge, density s exp(-s^2 / 2).
  const Tree stem = caterpillar(1, 1.5);
  CHECK(crt::log_density_binary(stem) == doctest::Approx(std::log(1.5) - 1.125));
  // k = 3: prod (2i-1) = 3, ordered factor 1/4.
  const Tree three = caterpillar(3, 2.0);
  CHECK(crt::log_density_binary(three) == doctest::Approx(std::log(3.0 / 4.0 * 2.0) - 2.0));
  CHECK(crt::log_density_ltree(three, 2.0) ==
        doctest::Approx(std::log(3.0 / 4.0 * 8.0 * 2.0) - 4.0));
  // A root with two children reads as a zero-length stem.
  const Tree cherry = Tree::from_preorder(std::vector<std::uint32_t>{2, 0, 0}, std::vector<double>{1.0, 2.0});
  CHECK(crt::log_density_binary(cherry) == doctest::Approx(std::log(0.5 * 3.0) - 4.5));
  const Tree unary = Tree::from_preorder(std::vector<std::uint32_t>{1, 1, 0}, std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(crt::log_density_binary(unary), crt::NotStrictBinary);
  CHECK_THROWS_AS(crt::log_density_ltree(three, 0.0), crt::DomainError);
  CHECK(crt::is_strict_binary(cherry));
  CHECK_FALSE(crt::is_strict_binary(unary));
  CHECK_FALSE(crt::is_strict_binary(Tree::single_vertex()));
}

TEST_CASE("density marginalizes over edge lengths") {
  // The 2k - 1 edge lengths with sum s fill a simplex of volume
  // s^{2k-2} / (2k-2)!, so integrating the density over lengths reduces to a
  // one-dimensional integral in s. Per ordered shape the mass is 2^{-(k-1)}.
  for (const std::size_t k : {1, 2, 5, 25}) {
    for (const double sigma2 : {0.5, 1.0, 2.0}) {
      const double log_simplex = -std::lgamma(2.0 * k - 1.0);
      auto g = [&](double s) {
        if (s == 0.0) return 0.0;
        return std::exp((2.0 * k - 2.0) * std::log(s) + log_simplex +
                        crt::log_density_ltree(caterpillar(k, s), sigma2));
      };
      const double hi = (std::sqrt(2.0 * k) + 12.0) / std::sqrt(sigma2);
      const double mass = integrate(g, hi);
      CHECK(mass == doctest::Approx(std::pow(0.5, static_cast<double>(k - 1))).epsilon(1e-8));
      // Normalized, the law of s is that of sqrt(X), X ~ Gamma(k, 2 / sigma^2).
      for (const double s : {0.3, 1.0, 3.0, 6.0}) {
        const double s_density = 2.0 * s * st::gamma_pdf(s * s, static_cast<double>(k), 2.0 / sigma2);
        CHECK(g(s) / mass == doctest::Approx(s_density).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("variance estimators") {
  const double w[] = {1.0, 1.0, 2.0};
  CHECK(crt::estimate_sigma2_distance(w).value == doctest::Approx(1.0));
  CHECK(crt::estimate_sigma2_distance(w).sample_size == 3);
  const double zeros[] = {0.0, 0.0};
  CHECK_THROWS_AS(crt::estimate_sigma2_distance(zeros), crt::DegenerateSample);
  CHECK_THROWS_AS(crt::estimate_sigma2_distance(std::span<const double>{}), crt::DegenerateSample);
  std::vector<TreeSummary> s(2);
  s[0].k = 3;
  s[0].s = 1.0;
  s[1].k = 5;
  s[1].s = 3.0;
  CHECK(crt::estimate_sigma2_ltree(s).value == doctest::Approx(16.0 / 10.0));

  // Both estimators are consistent under the limit law.
  crt::RngStream rng(51, 0);
  const auto big = limit_summaries(20000, 25, 2.0, rng);
  std::vector<double> ws;
  for (const auto& t : big) ws.push_back(t.w);
  CHECK(crt::estimate_sigma2_distance(ws).value == doctest::Approx(2.0).epsilon(0.05));
  CHECK(crt::estimate_sigma2_ltree(big).value == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("summaries of conditioned trees") {
  crt::RngStream rng(52, 0);
  const auto spec = crt::parse_offspring("geo:0.5");
  const Tree t = crt::sample_cgw(spec, 2000, crt::BranchLengthSpec::uniform(0, 2), rng);
  crt::SummaryOptions opts;
  const auto sum = crt::summarize(t, opts, rng);
  CHECK(sum.n == 2000);
  CHECK(sum.k == 25);
  CHECK(sum.s > 0.0);
  CHECK(sum.s * std::sqrt(2000.0) <= crt::total_path_length(t));
  const auto lone = crt::summarize(Tree::single_vertex(), opts, rng);
  CHECK(lone.n == 1);
  CHECK(lone.s == 0.0);

  std::vector<Tree> trees{t, t};
  const auto a = crt::summarize_all(trees, opts, 9);
  const auto b = crt::summarize_all(trees, opts, 9);
  CHECK(a[0].w == b[0].w);
  CHECK(a[1].s == b[1].s);
  // Tree i draws from its own stream.
  CHECK((a[0].w != a[1].w || a[0].s != a[1].s));
}

TEST_CASE("decisions agree with p-values") {
  crt::RngStream rng(53, 0);
  for (int i = 0; i < 300; ++i) {
    const double sigma_b = 1.0 + 0.02 * (i % 10);
    const auto a = limit_summaries(40, 5, 1.0, rng);
    const auto b = limit_summaries(40, 5, sigma_b, rng);
    const double alpha = (i % 3 == 0) ? 0.01 : 0.05;
    for (const auto& r : {crt::one_sample_ltree_test(a, alpha), crt::one_sample_dyck_test(a, alpha),
                          crt::one_sample_ltree_test(a, alpha, crt::LtreeReference::kF),
                          crt::two_sample_ltree_test(a, b, alpha), crt::two_sample_dyck_test(a, b, alpha),
                          crt::two_sample_ltree_test(a, b, alpha, crt::Sidedness::kGreater)}) {
      REQUIRE(r.reject == (r.p_value < alpha));
      REQUIRE(r.p_value >= 0.0);
      REQUIRE(r.p_value <= 1.0);
    }
    if (i % 20 == 0) {
      const auto r = crt::permutation_two_sample(a, b, crt::PermutationStatistic::kLtreeF, 199, alpha, rng);
      CHECK(r.reject == (r.p_value < alpha));
      CHECK(r.p_value >= 1.0 / 200.0);
    }
  }
}

TEST_CASE("two-sample statistics of identical groups") {
  crt::RngStream rng(54, 0);
  const auto a = limit_summaries(50, 25, 2.0, rng);
  for (const auto& r : {crt::two_sample_ltree_test(a, a, 0.01), crt::two_sample_dyck_test(a, a, 0.01)}) {
    CHECK(r.statistic == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(r.reject);
    CHECK(r.p_value == doctest::Approx(1.0));
    CHECK(r.sigma2_hat.size() == 2);
    CHECK(r.sigma2_hat[0] == r.sigma2_hat[1]);
  }
  const auto trees = poisson_trees(30, 10, 1.0, rng);
  const auto r = crt::two_sample_binary_test(trees, trees, 0.05);
  CHECK(r.statistic == doctest::Approx(1.0));
  CHECK_FALSE(r.reject);
}

TEST_CASE("statistics ignore the length scale") {
  crt::RngStream rng(55, 0);
  const auto a = limit_summaries(60, 25, 2.0, rng);
  const auto b = limit_summaries(60, 25, 1.0, rng);
  auto scaled = a;
  for (auto& t : scaled) {
    t.w *= 7.5;
    t.s *= 7.5;
  }
  CHECK(crt::one_sample_ltree_test(scaled, 0.01).statistic ==
        doctest::Approx(crt::one_sample_ltree_test(a, 0.01).statistic).epsilon(1e-12));
  CHECK(crt::one_sample_dyck_test(scaled, 0.01).statistic ==
        doctest::Approx(crt::one_sample_dyck_test(a, 0.01).statistic).epsilon(1e-12));
  CHECK(crt::two_sample_ltree_test(scaled, b, 0.01).statistic ==
        doctest::Approx(crt::two_sample_ltree_test(a, b, 0.01).statistic).epsilon(1e-12));
  CHECK(crt::one_sample_ltree_test(scaled, 0.01).sigma2_hat[0] ==
        doctest::Approx(crt::one_sample_ltree_test(a, 0.01).sigma2_hat[0] / 56.25));
}

TEST_CASE("exact pivots give nominal size") {
  crt::RngStream rng(56, 0);
  const int reps = 2000;
  const double alpha = 0.05;
  int ltree_f = 0;
  int binary_one = 0;
  int binary_two = 0;
  int binary_greater = 0;
  for (int i = 0; i < reps; ++i) {
    // sigma_d^2 S^2 / (2 sum k) is exactly F(2 sum k, 2p) under the limit law.
    const auto a = limit_summaries(30, 5, 1.7, rng);
    ltree_f += crt::one_sample_ltree_test(a, alpha, crt::LtreeReference::kF).reject;
    const auto ta = poisson_trees(10, 4, 1.0, rng);
    const auto tb = poisson_trees(12, 3, 1.0, rng);
    binary_one += crt::one_sample_binary_test(ta, alpha).reject;
    binary_two += crt::two_sample_binary_test(ta, tb, alpha).reject;
    binary_greater += crt::two_sample_binary_test(ta, tb, alpha, crt::Sidedness::kGreater).reject;
  }
  for (const int count : {ltree_f, binary_one, binary_two, binary_greater}) {
    const double rate = static_cast<double>(count) / reps;
    CHECK(rate < binomial_upper(alpha, reps));
    CHECK(rate > 2 * alpha - binomial_upper(alpha, reps));
  }
}

TEST_CASE("binary tests detect a changed rate") {
  crt::RngStream rng(57, 0);
  int one = 0;
  int two = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ta = poisson_trees(20, 10, 2.0, rng);
    const auto tb = poisson_trees(20, 10, 1.0, rng);
    one += crt::one_sample_binary_test(ta, 0.01).p_value < 0.01 ||
           crt::one_sample_binary_test(ta, 0.01).statistic < st::chi2_quantile(0.01, 400);
    two += crt::two_sample_binary_test(ta, tb, 0.01).reject;
  }
  CHECK(one >= 90);
  CHECK(two >= 90);
  std::vector<Tree> bad{Tree::from_preorder(std::vector<std::uint32_t>{1, 1, 0}, std::vector<double>{1, 1})};
  CHECK_THROWS_AS(crt::one_sample_binary_test(bad, 0.01), crt::NotStrictBinary);
}

TEST_CASE("one-sample tests under the limit law") {
  crt::RngStream rng(58, 0);
  int dyck = 0;
  const int reps = 1000;
  for (int i = 0; i < reps; ++i) dyck += crt::one_sample_dyck_test(limit_summaries(100, 25, 0.5, rng), 0.05).reject;
  CHECK(static_cast<double>(dyck) / reps < binomial_upper(0.05, reps));
}

TEST_CASE("permutation tests") {
  crt::RngStream rng(59, 0);
  CHECK_THROWS_AS(crt::permutation_two_sample(limit_summaries(5, 5, 1, rng), limit_summaries(5, 5, 1, rng),
                                              crt::PermutationStatistic::kLtreeF, 99, 0.05, rng),
                  crt::DomainError);
  // Exchangeable groups: size at most alpha.
  const int reps = 400;
  int rejects = 0;
  for (int i = 0; i < reps; ++i) {
    const auto a = limit_summaries(20, 5, 1.0, rng);
    const auto b = limit_summaries(25, 5, 1.0, rng);
    const auto r = crt::permutation_two_sample(a, b, crt::PermutationStatistic::kDyckF, 199, 0.05, rng);
    rejects += r.reject;
    REQUIRE(r.reject == (r.p_value < 0.05));
  }
  CHECK(static_cast<double>(rejects) / reps < binomial_upper(0.05, reps));

  // The ltree and dyck mean-square ratios are reciprocal per group, so the
  // oriented statistics coincide.
  const auto a = limit_summaries(30, 25, 2.0, rng);
  const auto b = limit_summaries(30, 25, 1.0, rng);
  crt::RngStream r1(1, 1);
  crt::RngStream r2(1, 1);
  const auto lt = crt::permutation_two_sample(a, b, crt::PermutationStatistic::kLtreeF, 500, 0.01, r1);
  const auto dy = crt::permutation_two_sample(a, b, crt::PermutationStatistic::kDyckF, 500, 0.01, r2);
  CHECK(lt.statistic == doctest::Approx(dy.statistic));
  CHECK(lt.p_value == dy.p_value);
  CHECK(lt.method == "ltree-F-perm");
  CHECK(lt.permutations == 500);
  // J = ceil(0.01 * 501 - 1) - 1 = 4: the fifth largest permuted value.
  CHECK(std::isfinite(lt.critical_value));
  const auto tiny = crt::permutation_two_sample(a, b, crt::PermutationStatistic::kLtreeF, 100, 0.005, r1);
  CHECK(std::isinf(tiny.critical_value));
  CHECK_FALSE(tiny.reject);

  // Binary permutation on Poisson trees with different rates.
  std::vector<TreeSummary> pa;
  std::vector<TreeSummary> pb;
  for (const auto& t : poisson_trees(20, 10, 3.0, rng)) pa.push_back(crt::binary_summary(t));
  for (const auto& t : poisson_trees(20, 10, 1.0, rng)) pb.push_back(crt::binary_summary(t));
  CHECK(crt::permutation_two_sample(pa, pb, crt::PermutationStatistic::kBinaryF, 999, 0.01, rng).reject);
}

TEST_CASE("single-vertex trees are excluded") {
  crt::RngStream rng(60, 0);
  auto a = limit_summaries(20, 5, 1.0, rng);
  a.push_back(TreeSummary{1, 1, 0.0, 0, 0.0});
  const auto r = crt::one_sample_ltree_test(a, 0.05);
  CHECK(r.n_excluded == 1);
  CHECK(r.n_trees[0] == 20);
  std::vector<TreeSummary> only{TreeSummary{1, 1, 0.0, 0, 0.0}};
  CHECK_THROWS_AS(crt::one_sample_dyck_test(only, 0.05), crt::InsufficientData);
  CHECK_THROWS_AS(crt::one_sample_dyck_test(a, 1.5), crt::DomainError);
}

TEST_CASE("reports serialize every field") {
  crt::RngStream rng(61, 0);
  const auto a = limit_summaries(20, 5, 1.0, rng);
  const auto b = limit_summaries(20, 5, 1.0, rng);
  const auto r = crt::two_sample_ltree_test(a, b, 0.01);
  const auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"method", "statistic", "reference", "df1", "df2", "permutations", "critical_value",
                          "p_value", "alpha", "decision", "sigma2_hat", "n_trees", "n_excluded"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["method"] == "ltree-F");
  CHECK(j["df1"].get<double>() == 200.0);
  CHECK(j["decision"] == (r.reject ? "reject" : "retain"));
  const std::string kv = r.to_key_value();
  CHECK(kv.find("method=ltree-F\n") != std::string::npos);
  CHECK(kv.find("n_trees=20,20\n") != std::string::npos);
}

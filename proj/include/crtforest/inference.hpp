#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crtforest/rng.hpp"
#include "crtforest/tree.hpp"

namespace crt {

/// How many leaves each L-tree is built from: a fixed count (capped at the
/// tree's leaf count) or a fraction of the leaves (at least one).
class LeafSpec {
 public:
  static LeafSpec count(std::size_t k);
  static LeafSpec fraction(double f);

  std::size_t leaves_for(std::size_t n_leaves) const;
  std::string name() const;

 private:
  LeafSpec(std::size_t k, double f) : count_(k), fraction_(f) {}
  std::size_t count_;
  double fraction_;
};

/// Per-tree scalars consumed by the tests.
struct TreeSummary {
  std::size_t n = 0;         // vertices
  std::size_t n_leaves = 0;  // leaves of the full tree
  double w = 0.0;            // n^{-1/2} d(root, V), V a random vertex
  std::size_t k = 0;         // leaves of the L-tree
  double s = 0.0;            // L-tree total path length (scaled, see below)
};

struct SummaryOptions {
  LeafSpec leaves = LeafSpec::count(25);
  RandomPoint point = RandomPoint::kUniformVertex;
  /// Random points per tree; w becomes the root mean square of their
  /// normalized distances. 1 reproduces the single-vertex statistic.
  std::size_t points_per_tree = 1;
};

/// W and an L-tree from uniformly chosen leaves, with s scaled by n^{-1/2} so
/// that s^2 sigma^2 is approximately Gamma(k, 2) for large conditioned trees.
TreeSummary summarize(const Tree& tree, const SummaryOptions& options, RngStream& rng);

/// Summaries of a sample; tree i draws from RngStream(seed, i), so identical
/// inputs give identical summaries.
std::vector<TreeSummary> summarize_all(std::span<const Tree> trees, const SummaryOptions& options,
                                       std::uint64_t seed);

/// For the Poisson binary model: k = leaf count, s = raw total path length.
/// Throws NotStrictBinary.
TreeSummary binary_summary(const Tree& tree);

/// True when every non-root vertex has 0 or 2 children and the root 1 or 2.
bool is_strict_binary(const Tree& tree);

// Densities.

/// Log density of a binary tree under the Poisson model with rate t:
/// log prod_{i<k}(2i-1) - (k-1) log 2 + log s - s^2/2. A root with two
/// children is read as a stem of length zero. Throws NotStrictBinary.
double log_density_binary(const Tree& tree);
/// The same with rate sigma^2 t: adds k log sigma^2 and uses -s^2 sigma^2/2.
double log_density_ltree(const Tree& tree, double sigma2);

// Variance estimators.

enum class VarianceMethod { kDistance, kLtree };

struct VarianceEstimate {
  double value;
  VarianceMethod method;
  std::size_t sample_size;
};

/// 2p / sum W_i^2. Throws DegenerateSample when the sum is 0 or p == 0.
VarianceEstimate estimate_sigma2_distance(std::span<const double> w);
/// 2 sum k_i / sum S_i^2. Throws DegenerateSample.
VarianceEstimate estimate_sigma2_ltree(std::span<const TreeSummary> summaries);

// Tests.

enum class Reference { kChi2, kF, kPermutation };

struct TestReport {
  std::string method;
  double statistic = 0.0;
  Reference reference = Reference::kChi2;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 for chi-square references
  std::size_t permutations = 0;
  double critical_value = 0.0;
  double p_value = 1.0;
  double alpha = 0.0;
  bool reject = false;
  std::vector<double> sigma2_hat;      // one entry per group
  std::vector<std::size_t> n_trees;    // trees used, per group
  std::size_t n_excluded = 0;          // single-vertex trees dropped

  /// Flat "key=value" lines.
  std::string to_key_value() const;
  /// JSON object with the same fields.
  std::string to_json() const;
};

/// Two-sample statistics are oriented to be >= 1 and compared with the
/// upper alpha/2 quantile; kGreater uses group a over group b against the
/// upper alpha quantile.
enum class Sidedness { kTwoSided, kGreater };

/// Reference law for the one-sample L-tree statistic. kChi2 treats the
/// variance estimate as exact; kF accounts for its sampling error, since
/// T / (2 sum k) is F(2 sum k, 2p) when the pivots hold exactly.
enum class LtreeReference { kChi2, kF };

/// Sum of squared total path lengths against chi-square with 2 sum k df.
TestReport one_sample_binary_test(std::span<const Tree> trees, double alpha);
/// Ratio of mean squared path lengths per leaf against F(2 sum k_a, 2 sum k_b).
TestReport two_sample_binary_test(std::span<const Tree> trees_a, std::span<const Tree> trees_b,
                                  double alpha, Sidedness sides = Sidedness::kTwoSided);

/// T = sigma_d^2 sum S_i^2 against chi-square with 2 sum k df.
TestReport one_sample_ltree_test(std::span<const TreeSummary> summaries, double alpha,
                                 LtreeReference reference = LtreeReference::kChi2);
/// Each group scaled by its own sigma_d^2; F(2 sum k_a, 2 sum k_b).
TestReport two_sample_ltree_test(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                 double alpha, Sidedness sides = Sidedness::kTwoSided);
/// T = sigma_l^2 sum W_i^2 against chi-square with 2p df.
TestReport one_sample_dyck_test(std::span<const TreeSummary> summaries, double alpha);
/// Each group scaled by its own sigma_l^2; F(2p, 2q).
TestReport two_sample_dyck_test(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                double alpha, Sidedness sides = Sidedness::kTwoSided);

enum class PermutationStatistic { kLtreeF, kDyckF, kBinaryF };

/// Permutes summaries across the two groups. p = (1 + #{T* >= T}) / (B + 1);
/// the critical value is the (J+1)-th largest permuted statistic with J the
/// largest integer below alpha (B + 1) - 1, so reject <=> p < alpha.
/// Binary statistics expect binary_summary() records. Throws DomainError
/// when B < 100.
TestReport permutation_two_sample(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                  PermutationStatistic kind, std::size_t n_perm, double alpha,
                                  RngStream& rng);

std::string to_string(Reference reference);
std::string to_string(PermutationStatistic kind);

}  // namespace crt

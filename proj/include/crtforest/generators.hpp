#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crtforest/rng.hpp"
#include "crtforest/tree.hpp"

namespace crt {

enum class OffspringFamily {
  kGeometric,             // p (1-p)^k on k >= 0
  kBinomial2,             // Bin(2, p)
  kStrictBinary,          // 0 or 2 children, P(2) = p
  kUnaryBinary,           // P(0) = p0, P(1) = p1, P(2) = 1 - p0 - p1
  kUnorderedUnaryBinary,  // (1, sqrt 2, 1) / (2 + sqrt 2)
  kMAry,                  // Bin(m, p), p = 1/m unless given
};

/// Offspring law on {0, 1, ...}: either a finite probability vector or a
/// geometric tail P(k) = p (1-p)^k.
class OffspringPmf {
 public:
  static OffspringPmf finite(std::vector<double> probabilities);
  static OffspringPmf geometric(double p);

  double probability(std::uint64_t k) const;
  double mean() const;
  double variance() const;
  bool is_geometric() const { return geometric_p_ > 0.0; }
  double geometric_p() const { return geometric_p_; }
  /// Finite support only.
  const std::vector<double>& probabilities() const { return finite_; }
  /// Largest k with positive probability; UINT64_MAX for geometric laws.
  std::uint64_t max_degree() const;

  std::uint64_t sample(RngStream& rng) const;

 private:
  std::vector<double> finite_;
  double geometric_p_ = 0.0;
};

/// Offspring distribution together with its critical (mean one) tilt
/// pi_k lambda^k / N_lambda, which yields the same conditioned trees.
struct OffspringSpec {
  OffspringFamily family;
  std::vector<double> params;
  double lambda;
  OffspringPmf raw;
  OffspringPmf tilted;

  /// Offspring variance of the critical tilt, the sigma^2 of the limit tree.
  double sigma2() const { return tilted.variance(); }
  std::string name() const;
};

/// Builds the spec and its critical tilt. Throws DomainError for parameters
/// outside their range and NotTiltable if no finite tilt gives mean one.
OffspringSpec tilt_to_critical(OffspringFamily family, std::vector<double> params);

/// Parses "geo:0.5", "bin2:0.5", "strictbin:0.35" (alias "bin:0.35"),
/// "ub:0.3:0.3", "uub", "mary:3" or "mary:3:0.2".
OffspringSpec parse_offspring(std::string_view text);

/// One draw from the critical tilt.
std::uint64_t sample_offspring(const OffspringSpec& spec, RngStream& rng);

class BranchLengthSpec {
 public:
  enum class Kind { kUniform, kConstant, kExponential };

  static BranchLengthSpec uniform(double lo, double hi);
  static BranchLengthSpec constant(double value);
  static BranchLengthSpec exponential(double mean);
  /// "uniform:0:2", "const:1", "exp:1".
  static BranchLengthSpec parse(std::string_view text);

  Kind kind() const { return kind_; }
  double mean() const;
  double sample(RngStream& rng) const;
  std::string name() const;

 private:
  BranchLengthSpec(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

using DegreeSequence = std::vector<std::uint32_t>;

enum class DegreeSampling {
  kCountRejection,  // multinomial counts until sum n-1, then shuffle
  kIidRejection,    // n i.i.d. degrees until sum n-1
};

/// n degrees distributed as i.i.d. draws from the critical tilt conditioned
/// on summing to n - 1 (not yet rotated into a tree). Both sampling modes
/// produce that law; count rejection costs O(support) per attempt instead of
/// O(n). Throws InfeasibleSize when no sequence can sum to n - 1 and
/// RejectionBudgetExceeded after max(100, 50 sqrt n) failed attempts.
DegreeSequence sample_degree_sequence(const OffspringSpec& spec, std::size_t n, RngStream& rng,
                                      DegreeSampling mode = DegreeSampling::kCountRejection);

/// The unique cyclic rotation whose Lukasiewicz walk stays above -1 until the
/// last step. Throws DomainError unless the degrees sum to n - 1.
DegreeSequence rotate_to_tree(const DegreeSequence& sequence);

/// Preorder assembly; edge lengths i.i.d. from `lengths`.
Tree assemble_tree(const DegreeSequence& rotated, const BranchLengthSpec& lengths, RngStream& rng);

/// Galton-Watson tree conditioned to have exactly n vertices.
Tree sample_cgw(const OffspringSpec& spec, std::size_t n, const BranchLengthSpec& lengths,
                RngStream& rng);

struct GwSample {
  Tree tree;
  bool truncated;
};

/// Plain (unconditioned) Galton-Watson tree from the raw offspring law,
/// grown breadth-first and cut off at `max_vertices`.
GwSample sample_gw_unconditioned(const OffspringSpec& spec, std::size_t max_vertices,
                                 const BranchLengthSpec& lengths, RngStream& rng);

/// Constant-rate birth-death process started from two lineages and stopped
/// at `n_taxa` extant lineages; tips are sampled one waiting time later.
/// Extinct subtrees are pruned. Edge lengths are elapsed times.
Tree sample_birth_death(std::size_t n_taxa, double speciation_rate, double extinction_rate,
                        RngStream& rng);

/// Kingman coalescent on n labelled leaves (labels 0..n-1).
Tree sample_coalescent(std::size_t n_leaves, RngStream& rng);

/// Ordered binary tree grown from the arrival times of a Poisson process
/// with rate theta * t: each new edge of length t_{j+1} - t_j is attached at
/// a uniform point of the current tree, on the left or right with equal
/// probability.
Tree sample_poisson_binary(std::size_t k_leaves, double theta, RngStream& rng);

}  // namespace crt

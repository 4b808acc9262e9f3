#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crtforest/generators.hpp"
#include "crtforest/inference.hpp"

namespace crt {

/// A named tree source used by the sampler and the calibration harness.
///
///   Geo(0.5), Bin(0.5), Bin(0.35), Bin2(0.5)  conditioned GW trees
///   GW-Bin(2,0.5)                            unconditioned GW, Bin(2, 0.5)
///   Phylo.bd                                 birth-death, speciation rate 2
///   Phylo.coal                               Kingman coalescent
///   cgw:<offspring>, gw:<offspring>          any offspring spec
///   bd:<rate>[:<extinction>]
class Scenario {
 public:
  enum class Kind { kConditioned, kUnconditioned, kBirthDeath, kCoalescent };

  static Scenario parse(std::string_view text);

  /// A tree with about n vertices: exactly n for conditioned trees, at most
  /// n for unconditioned trees, and (n + 1) / 2 leaves for the binary
  /// phylogenetic models. The named table scenarios (Geo(p), Bin(p),
  /// Bin2(p)) round n up to the next feasible size; cgw: specs throw
  /// InfeasibleSize instead.
  Tree sample(std::size_t n, const BranchLengthSpec& lengths, RngStream& rng) const;
  /// Smallest feasible conditioned-tree size >= n.
  std::size_t feasible_size(std::size_t n) const;

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  const std::optional<OffspringSpec>& offspring() const { return offspring_; }

 private:
  std::string name_;
  Kind kind_ = Kind::kConditioned;
  std::optional<OffspringSpec> offspring_;
  bool round_size_ = false;
  double speciation_ = 2.0;
  double extinction_ = 0.0;
};

enum class CalibrationMethod {
  kLtreeChi2,
  kDyckChi2,
  kLtreeF,
  kDyckF,
  kLtreePerm,
  kDyckPerm,
};

CalibrationMethod parse_calibration_method(std::string_view name);
std::string to_string(CalibrationMethod method);
bool is_two_sample(CalibrationMethod method);

struct CalibrationConfig {
  Scenario scenario = Scenario::parse("Geo(0.5)");
  /// Group b of the two-sample tests.
  Scenario null_group = Scenario::parse("Bin2(0.5)");
  std::vector<CalibrationMethod> methods;
  std::size_t num_trees = 100;
  std::size_t n_vertices = 1000;
  std::size_t trials = 200;
  double alpha = 0.01;
  SummaryOptions summary;
  std::size_t permutations = 5000;
  BranchLengthSpec lengths = BranchLengthSpec::uniform(0.0, 2.0);
  std::uint64_t seed = 1;
  /// 0 means the CRT_FOREST_THREADS variable, else the hardware count.
  std::size_t threads = 0;
};

struct CalibrationRow {
  std::string distribution;
  CalibrationMethod method;
  std::size_t sample_size;
  double alpha;
  std::size_t trials;
  std::size_t rejections;
  double reject_rate;
  std::uint64_t seed;
};

/// Runs `trials` independent replications. Trial t draws everything from
/// RngStream(seed, t), so results do not depend on the thread count.
std::vector<CalibrationRow> run_calibration(const CalibrationConfig& config);

std::string calibration_csv_header();
std::string to_csv(const CalibrationRow& row);

/// Worker count from CRT_FOREST_THREADS, defaulting to the hardware count.
std::size_t default_thread_count();

}  // namespace crt

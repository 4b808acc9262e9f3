#include "crtforest/generators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "crtforest/distributions.hpp"
#include "crtforest/errors.hpp"

namespace crt {

// ---------------------------------------------------------------------------
// Offspring laws

OffspringPmf OffspringPmf::finite(std::vector<double> probabilities) {
  const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (probabilities.empty() || std::abs(total - 1.0) > 1e-12) {
    throw DomainError("offspring probabilities must sum to 1");
  }
  for (const double p : probabilities) {
    if (!(p >= 0.0)) throw DomainError("offspring probabilities must be nonnegative");
  }
  while (probabilities.size() > 1 && probabilities.back() == 0.0) probabilities.pop_back();
  OffspringPmf pmf;
  pmf.finite_ = std::move(probabilities);
  return pmf;
}

OffspringPmf OffspringPmf::geometric(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("geometric offspring needs 0 < p < 1");
  OffspringPmf pmf;
  pmf.geometric_p_ = p;
  return pmf;
}

double OffspringPmf::probability(std::uint64_t k) const {
  if (is_geometric()) return geometric_p_ * std::pow(1.0 - geometric_p_, static_cast<double>(k));
  return k < finite_.size() ? finite_[k] : 0.0;
}

double OffspringPmf::mean() const {
  if (is_geometric()) return (1.0 - geometric_p_) / geometric_p_;
  double m = 0.0;
  for (std::size_t k = 0; k < finite_.size(); ++k) m += static_cast<double>(k) * finite_[k];
  return m;
}

double OffspringPmf::variance() const {
  if (is_geometric()) return (1.0 - geometric_p_) / (geometric_p_ * geometric_p_);
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < finite_.size(); ++k) {
    const double d = static_cast<double>(k) - m;
    v += d * d * finite_[k];
  }
  return v;
}

std::uint64_t OffspringPmf::max_degree() const {
  if (is_geometric()) return std::numeric_limits<std::uint64_t>::max();
  return finite_.size() - 1;
}

std::uint64_t OffspringPmf::sample(RngStream& rng) const {
  if (is_geometric()) return stats::sample_geometric(geometric_p_, rng);
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < finite_.size(); ++k) {
    if (u < finite_[k]) return k;
    u -= finite_[k];
  }
  return finite_.size() - 1;
}

namespace {

double binomial_coefficient(unsigned n, unsigned k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

std::vector<double> binomial_pmf(unsigned m, double p) {
  std::vector<double> out(m + 1);
  for (unsigned k = 0; k <= m; ++k) {
    out[k] = binomial_coefficient(m, k) * std::pow(p, k) * std::pow(1.0 - p, m - k);
  }
  return out;
}

std::vector<double> tilt(const std::vector<double>& pmf, double lambda) {
  std::vector<double> out(pmf.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    out[k] = pmf[k] * std::pow(lambda, static_cast<double>(k));
    norm += out[k];
  }
  for (double& x : out) x /= norm;
  return out;
}

void require_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(what) + " must lie in (0, 1)");
}

void require_param_count(const std::vector<double>& params, std::size_t n, const char* family) {
  if (params.size() != n) {
    throw DomainError(std::string(family) + " takes " + std::to_string(n) + " parameter(s)");
  }
}

}  // namespace

OffspringSpec tilt_to_critical(OffspringFamily family, std::vector<double> params) {
  OffspringSpec spec{family, params, 1.0, OffspringPmf::geometric(0.5), OffspringPmf::geometric(0.5)};
  switch (family) {
    case OffspringFamily::kGeometric: {
      require_param_count(params, 1, "geo");
      const double p = params[0];
      require_open_unit(p, "geo p");
      // Tilting a geometric law multiplies its ratio (1-p) by lambda; ratio 1/2
      // gives mean one.
      spec.lambda = 1.0 / (2.0 * (1.0 - p));
      if (!(spec.lambda * (1.0 - p) < 1.0)) throw NotTiltable("geometric tilt diverges");
      spec.raw = OffspringPmf::geometric(p);
      spec.tilted = OffspringPmf::geometric(1.0 - spec.lambda * (1.0 - p));
      break;
    }
    case OffspringFamily::kBinomial2: {
      require_param_count(params, 1, "bin2");
      const double p = params[0];
      require_open_unit(p, "bin2 p");
      spec.lambda = (1.0 - p) / p;
      spec.raw = OffspringPmf::finite(binomial_pmf(2, p));
      spec.tilted = OffspringPmf::finite(tilt(spec.raw.probabilities(), spec.lambda));
      break;
    }
    case OffspringFamily::kStrictBinary: {
      require_param_count(params, 1, "strictbin");
      const double p = params[0];
      require_open_unit(p, "strictbin p");
      spec.lambda = std::sqrt((1.0 - p) / p);
      spec.raw = OffspringPmf::finite({1.0 - p, 0.0, p});
      spec.tilted = OffspringPmf::finite(tilt(spec.raw.probabilities(), spec.lambda));
      break;
    }
    case OffspringFamily::kUnaryBinary: {
      require_param_count(params, 2, "ub");
      const double p0 = params[0];
      const double p1 = params[1];
      require_open_unit(p0, "ub p0");
      require_open_unit(p1, "ub p1");
      const double p2 = 1.0 - p0 - p1;
      if (!(p2 > 0.0)) throw NotTiltable("ub needs p0 + p1 < 1 for a critical tilt to exist");
      // Mean one under the tilt requires p2 lambda^2 = p0.
      spec.lambda = std::sqrt(p0 / p2);
      spec.raw = OffspringPmf::finite({p0, p1, p2});
      spec.tilted = OffspringPmf::finite(tilt(spec.raw.probabilities(), spec.lambda));
      break;
    }
    case OffspringFamily::kUnorderedUnaryBinary: {
      require_param_count(params, 0, "uub");
      const double norm = 2.0 + std::sqrt(2.0);
      spec.raw = OffspringPmf::finite({1.0 / norm, std::sqrt(2.0) / norm, 1.0 / norm});
      spec.tilted = spec.raw;
      break;
    }
    case OffspringFamily::kMAry: {
      if (params.empty() || params.size() > 2) throw DomainError("mary takes m and optionally p");
      const double m_real = params[0];
      if (!(m_real >= 2.0) || m_real != std::floor(m_real) || m_real > 1000.0) {
        throw DomainError("mary needs an integer m in [2, 1000]");
      }
      const auto m = static_cast<unsigned>(m_real);
      const double p = params.size() == 2 ? params[1] : 1.0 / m;
      require_open_unit(p, "mary p");
      spec.lambda = (1.0 - p) / (p * (m - 1));
      spec.raw = OffspringPmf::finite(binomial_pmf(m, p));
      spec.tilted = OffspringPmf::finite(binomial_pmf(m, 1.0 / m));
      break;
    }
  }
  if (std::abs(spec.tilted.mean() - 1.0) > 1e-12) {
    throw NotTiltable("tilted offspring mean is " + std::to_string(spec.tilted.mean()));
  }
  return spec;
}

std::string OffspringSpec::name() const {
  static constexpr const char* kNames[] = {"geo", "bin2", "strictbin", "ub", "uub", "mary"};
  std::ostringstream out;
  out << kNames[static_cast<int>(family)];
  for (const double p : params) out << ':' << p;
  return out.str();
}

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(std::string_view text, std::string_view context) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DomainError("cannot parse number '" + std::string(text) + "' in '" + std::string(context) +
                      "'");
  }
  return value;
}

}  // namespace

OffspringSpec parse_offspring(std::string_view text) {
  const auto parts = split(text, ':');
  std::vector<double> params;
  for (std::size_t i = 1; i < parts.size(); ++i) params.push_back(parse_number(parts[i], text));
  const std::string_view family = parts[0];
  if (family == "geo") return tilt_to_critical(OffspringFamily::kGeometric, params);
  if (family == "bin2") return tilt_to_critical(OffspringFamily::kBinomial2, params);
  if (family == "strictbin" || family == "bin") {
    return tilt_to_critical(OffspringFamily::kStrictBinary, params);
  }
  if (family == "ub") return tilt_to_critical(OffspringFamily::kUnaryBinary, params);
  if (family == "uub") return tilt_to_critical(OffspringFamily::kUnorderedUnaryBinary, params);
  if (family == "mary") return tilt_to_critical(OffspringFamily::kMAry, params);
  throw DomainError("unknown offspring family '" + std::string(family) + "'");
}

std::uint64_t sample_offspring(const OffspringSpec& spec, RngStream& rng) {
  return spec.tilted.sample(rng);
}

// ---------------------------------------------------------------------------
// Branch lengths

BranchLengthSpec BranchLengthSpec::uniform(double lo, double hi) {
  if (!(lo >= 0.0 && hi > lo && std::isfinite(hi))) {
    throw DomainError("uniform branch lengths need 0 <= lo < hi");
  }
  return {Kind::kUniform, lo, hi};
}

BranchLengthSpec BranchLengthSpec::constant(double value) {
  if (!(value > 0.0 && std::isfinite(value))) throw DomainError("constant branch length must be positive");
  return {Kind::kConstant, value, value};
}

BranchLengthSpec BranchLengthSpec::exponential(double mean) {
  if (!(mean > 0.0 && std::isfinite(mean))) throw DomainError("exponential branch lengths need a positive mean");
  return {Kind::kExponential, mean, mean};
}

BranchLengthSpec BranchLengthSpec::parse(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts[0] == "uniform" && parts.size() == 3) {
    return uniform(parse_number(parts[1], text), parse_number(parts[2], text));
  }
  if ((parts[0] == "const" || parts[0] == "constant") && parts.size() == 2) {
    return constant(parse_number(parts[1], text));
  }
  if ((parts[0] == "exp" || parts[0] == "exponential") && parts.size() == 2) {
    return exponential(parse_number(parts[1], text));
  }
  throw DomainError("cannot parse branch length spec '" + std::string(text) + "'");
}

double BranchLengthSpec::mean() const {
  switch (kind_) {
    case Kind::kUniform:
      return 0.5 * (a_ + b_);
    case Kind::kConstant:
    case Kind::kExponential:
      return a_;
  }
  return a_;
}

double BranchLengthSpec::sample(RngStream& rng) const {
  switch (kind_) {
    case Kind::kUniform:
      return rng.uniform(a_, b_);
    case Kind::kConstant:
      return a_;
    case Kind::kExponential:
      return stats::sample_exponential(a_, rng);
  }
  return a_;
}

std::string BranchLengthSpec::name() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::kUniform:
      out << "uniform:" << a_ << ':' << b_;
      break;
    case Kind::kConstant:
      out << "const:" << a_;
      break;
    case Kind::kExponential:
      out << "exp:" << a_;
      break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Conditioned Galton-Watson trees

namespace {

std::uint64_t gcd_of_support(const OffspringPmf& pmf) {
  if (pmf.is_geometric()) return 1;
  std::uint64_t g = 0;
  const auto& probs = pmf.probabilities();
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > 0.0) g = std::gcd(g, static_cast<std::uint64_t>(k));
  }
  return g;
}

void check_feasible(const OffspringPmf& pmf, std::size_t n) {
  if (n == 0) throw InfeasibleSize("a tree needs at least one vertex");
  if (n == 1) return;
  const std::uint64_t g = gcd_of_support(pmf);
  if (g == 0 || pmf.probability(0) == 0.0 || (n - 1) % g != 0) {
    throw InfeasibleSize("no offspring sequence of this family sums to " + std::to_string(n - 1) +
                         " over " + std::to_string(n) + " vertices");
  }
}

// Multinomial counts per degree, conditioned on the degree total being n-1.
// Returns false on a rejected attempt.
bool sample_counts(const OffspringPmf& pmf, std::size_t n, RngStream& rng,
                   std::vector<std::uint64_t>& counts) {
  counts.clear();
  std::uint64_t remaining = n;
  std::uint64_t degree_total = 0;
  const std::uint64_t target = n - 1;
  if (pmf.is_geometric()) {
    // Memoryless: P(K = k | K >= k) = p for every k.
    const double p = pmf.geometric_p();
    for (std::uint64_t k = 0; remaining > 0; ++k) {
      const std::uint64_t c = k + 1 == 0 ? remaining : stats::sample_binomial(remaining, p, rng);
      counts.push_back(c);
      remaining -= c;
      degree_total += c * k;
      if (degree_total > target) return false;
    }
    return degree_total == target;
  }
  const auto& probs = pmf.probabilities();
  double tail = 1.0;
  for (std::size_t k = 0; k < probs.size() && remaining > 0; ++k) {
    std::uint64_t c;
    if (k + 1 == probs.size()) {
      c = remaining;
    } else {
      const double q = tail > 0.0 ? std::min(1.0, probs[k] / tail) : 1.0;
      c = stats::sample_binomial(remaining, q, rng);
    }
    tail -= probs[k];
    counts.push_back(c);
    remaining -= c;
    degree_total += c * k;
    if (degree_total > target) return false;
  }
  return degree_total == target;
}

DegreeSequence expand_and_shuffle(const std::vector<std::uint64_t>& counts, std::size_t n,
                                  RngStream& rng) {
  DegreeSequence seq;
  seq.reserve(n);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    seq.insert(seq.end(), counts[k], static_cast<std::uint32_t>(k));
  }
  for (std::size_t i = n; i > 1; --i) std::swap(seq[i - 1], seq[rng.below(i)]);
  return seq;
}

}  // namespace

DegreeSequence sample_degree_sequence(const OffspringSpec& spec, std::size_t n, RngStream& rng,
                                      DegreeSampling mode) {
  const OffspringPmf& pmf = spec.tilted;
  check_feasible(pmf, n);
  if (n == 1) return {0};

  if (spec.family == OffspringFamily::kStrictBinary && mode == DegreeSampling::kCountRejection) {
    // Counts are forced: (n-1)/2 binary vertices and (n+1)/2 leaves.
    return expand_and_shuffle({(n + 1) / 2, 0, (n - 1) / 2}, n, rng);
  }

  const auto budget = static_cast<std::size_t>(
      std::max(100.0, std::ceil(50.0 * std::sqrt(static_cast<double>(n)))));
  if (mode == DegreeSampling::kCountRejection) {
    std::vector<std::uint64_t> counts;
    for (std::size_t attempt = 0; attempt < budget; ++attempt) {
      if (sample_counts(pmf, n, rng, counts)) return expand_and_shuffle(counts, n, rng);
    }
  } else {
    DegreeSequence seq(n);
    for (std::size_t attempt = 0; attempt < budget; ++attempt) {
      std::uint64_t total = 0;
      for (auto& d : seq) {
        d = static_cast<std::uint32_t>(pmf.sample(rng));
        total += d;
      }
      if (total == n - 1) return seq;
    }
  }
  throw RejectionBudgetExceeded("no degree sequence summing to " + std::to_string(n - 1) + " after " +
                                std::to_string(budget) + " attempts");
}

DegreeSequence rotate_to_tree(const DegreeSequence& sequence) {
  const std::size_t n = sequence.size();
  std::uint64_t total = 0;
  for (const auto d : sequence) total += d;
  if (n == 0 || total != n - 1) {
    throw DomainError("degree sequence must sum to n - 1 to be rotated into a tree");
  }
  // The walk ends at -1; the valid rotation starts right after the first
  // position where the walk attains its minimum.
  std::int64_t walk = 0;
  std::int64_t minimum = std::numeric_limits<std::int64_t>::max();
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    walk += static_cast<std::int64_t>(sequence[i]) - 1;
    if (walk < minimum) {
      minimum = walk;
      argmin = i;
    }
  }
  const std::size_t start = (argmin + 1) % n;
  DegreeSequence rotated(n);
  for (std::size_t i = 0; i < n; ++i) rotated[i] = sequence[(start + i) % n];
  return rotated;
}

Tree assemble_tree(const DegreeSequence& rotated, const BranchLengthSpec& lengths, RngStream& rng) {
  std::vector<double> edge_lengths(rotated.size() - 1);
  for (double& x : edge_lengths) x = lengths.sample(rng);
  return Tree::from_preorder(rotated, edge_lengths);
}

Tree sample_cgw(const OffspringSpec& spec, std::size_t n, const BranchLengthSpec& lengths,
                RngStream& rng) {
  const DegreeSequence seq = sample_degree_sequence(spec, n, rng);
  return assemble_tree(rotate_to_tree(seq), lengths, rng);
}

GwSample sample_gw_unconditioned(const OffspringSpec& spec, std::size_t max_vertices,
                                 const BranchLengthSpec& lengths, RngStream& rng) {
  if (max_vertices == 0) throw DomainError("vertex cap must be positive");
  TreeBuilder builder;
  std::vector<TreeBuilder::Handle> frontier{builder.root()};
  bool truncated = false;
  for (std::size_t head = 0; head < frontier.size() && !truncated; ++head) {
    const std::uint64_t children = spec.raw.sample(rng);
    for (std::uint64_t c = 0; c < children; ++c) {
      if (builder.size() >= max_vertices) {
        truncated = true;
        break;
      }
      frontier.push_back(builder.add_child(frontier[head], lengths.sample(rng)));
    }
  }
  return {builder.build(), truncated};
}

// ---------------------------------------------------------------------------
// Phylogenetic alternatives

Tree sample_birth_death(std::size_t n_taxa, double speciation_rate, double extinction_rate,
                        RngStream& rng) {
  if (n_taxa < 2) throw DomainError("birth-death trees need at least two taxa");
  if (!(speciation_rate > 0.0) || !(extinction_rate >= 0.0)) {
    throw DomainError("birth-death needs a positive speciation rate and nonnegative extinction rate");
  }
  constexpr std::uint64_t kExtinct = std::numeric_limits<std::uint64_t>::max();
  const double total_rate = speciation_rate + extinction_rate;

  for (;;) {
    struct Lineage {
      TreeBuilder::Handle parent;
      double start;
    };
    TreeBuilder builder;
    std::vector<Lineage> live{{builder.root(), 0.0}, {builder.root(), 0.0}};
    bool any_extinct = false;
    double t = 0.0;
    while (!live.empty() && live.size() < n_taxa) {
      t += stats::sample_exponential(1.0 / (total_rate * static_cast<double>(live.size())), rng);
      const std::size_t i = rng.below(live.size());
      const Lineage lin = live[i];
      if (rng.uniform() * total_rate < speciation_rate) {
        const auto node = builder.add_child(lin.parent, t - lin.start);
        live[i] = {node, t};
        live.push_back({node, t});
      } else {
        builder.add_child(lin.parent, t - lin.start, kExtinct);
        any_extinct = true;
        live[i] = live.back();
        live.pop_back();
      }
    }
    if (live.empty()) continue;

    const double end =
        t + stats::sample_exponential(1.0 / (total_rate * static_cast<double>(live.size())), rng);
    for (const Lineage& lin : live) builder.add_child(lin.parent, end - lin.start);
    Tree full = builder.build();
    if (!any_extinct) return full;

    LeafSelection extant;
    for (const auto leaf : full.leaves()) {
      if (full.label(leaf) != kExtinct) extant.leaves.push_back(leaf);
    }
    Tree pruned = ltree_extract(full, extant);
    // Drop a unary root left behind by an extinct crown lineage.
    std::vector<std::uint32_t> degrees;
    std::vector<double> edge_lengths;
    std::size_t first = pruned.out_degree(pruned.root()) == 1 ? 1 : 0;
    for (std::size_t v = first; v < pruned.size(); ++v) {
      degrees.push_back(pruned.out_degree(static_cast<Tree::Vertex>(v)));
      if (v > first) edge_lengths.push_back(pruned.length(static_cast<Tree::Vertex>(v)));
    }
    return Tree::from_preorder(degrees, edge_lengths);
  }
}

Tree sample_coalescent(std::size_t n_leaves, RngStream& rng) {
  if (n_leaves < 2) throw DomainError("the coalescent needs at least two leaves");
  std::vector<std::uint32_t> active(n_leaves);
  std::iota(active.begin(), active.end(), 0U);
  std::vector<Merge> merges;
  merges.reserve(n_leaves - 1);
  double t = 0.0;
  for (std::size_t k = n_leaves; k >= 2; --k) {
    const double pairs = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
    t += stats::sample_exponential(1.0 / pairs, rng);
    const std::size_t i = rng.below(k);
    std::size_t j = rng.below(k - 1);
    if (j >= i) ++j;
    const auto id = static_cast<std::uint32_t>(n_leaves + merges.size());
    merges.push_back({active[i], active[j], t});
    active[i] = id;
    active[j] = active.back();
    active.pop_back();
  }
  return tree_from_merges(n_leaves, merges);
}

namespace {

// Fenwick tree over edge lengths for position lookups along the tree.
class LengthIndex {
 public:
  explicit LengthIndex(std::size_t capacity) : tree_(capacity + 1, 0.0) {}

  void add(std::size_t i, double delta) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  // Index whose cumulative range contains u, and the offset of u inside it.
  std::pair<std::size_t, double> find(double u) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      if (pos + step < tree_.size() && tree_[pos + step] <= u) {
        pos += step;
        u -= tree_[pos];
      }
    }
    return {pos, u};
  }

 private:
  std::vector<double> tree_;
};

}  // namespace

Tree sample_poisson_binary(std::size_t k_leaves, double theta, RngStream& rng) {
  if (k_leaves < 1) throw DomainError("the Poisson binary model needs at least one leaf");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");

  // Arrival times of a Poisson process with mean measure theta t^2 / 2.
  double gamma_sum = stats::sample_exponential(1.0, rng);
  double arrival = std::sqrt(2.0 * gamma_sum / theta);

  TreeBuilder builder;
  LengthIndex index(2 * k_leaves);
  const auto first = builder.add_child(builder.root(), arrival);
  index.add(first, arrival);
  for (std::size_t j = 1; j < k_leaves; ++j) {
    gamma_sum += stats::sample_exponential(1.0, rng);
    const double next = std::sqrt(2.0 * gamma_sum / theta);
    const double new_edge = next - arrival;

    std::size_t edge;
    double offset;
    do {
      std::tie(edge, offset) = index.find(rng.uniform() * arrival);
    } while (edge == 0 || edge >= builder.size() || !(offset > 0.0) ||
             !(offset < builder.length(static_cast<TreeBuilder::Handle>(edge))));

    const auto below = static_cast<TreeBuilder::Handle>(edge);
    const auto mid = builder.split_edge(below, offset);
    index.add(below, -offset);
    index.add(mid, offset);
    const auto leaf = rng.coin() ? builder.add_child(mid, new_edge)
                                 : builder.add_child_front(mid, new_edge);
    index.add(leaf, new_edge);
    arrival = next;
  }
  return builder.build();
}

}  // namespace crt

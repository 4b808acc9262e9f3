#include "crtforest/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "crtforest/distributions.hpp"
#include "crtforest/errors.hpp"

namespace crt {

LeafSpec LeafSpec::count(std::size_t k) {
  if (k == 0) throw DomainError("leaf count must be at least 1");
  return {k, 0.0};
}

LeafSpec LeafSpec::fraction(double f) {
  if (!(f > 0.0 && f <= 1.0)) throw DomainError("leaf fraction must lie in (0, 1]");
  return {0, f};
}

std::size_t LeafSpec::leaves_for(std::size_t n_leaves) const {
  if (count_ > 0) return std::min(count_, n_leaves);
  const auto k = static_cast<std::size_t>(std::llround(fraction_ * static_cast<double>(n_leaves)));
  return std::clamp<std::size_t>(k, 1, n_leaves);
}

std::string LeafSpec::name() const {
  std::ostringstream out;
  if (count_ > 0) {
    out << "count:" << count_;
  } else {
    out << "fraction:" << fraction_;
  }
  return out.str();
}

TreeSummary summarize(const Tree& tree, const SummaryOptions& options, RngStream& rng) {
  TreeSummary out;
  out.n = tree.size();
  out.n_leaves = tree.leaf_count();
  if (tree.size() == 1) return out;
  if (options.points_per_tree == 0) throw DomainError("points_per_tree must be positive");

  double w2 = 0.0;
  for (std::size_t i = 0; i < options.points_per_tree; ++i) {
    const double w = random_vertex_distance(tree, rng, options.point);
    w2 += w * w;
  }
  out.w = std::sqrt(w2 / static_cast<double>(options.points_per_tree));

  out.k = options.leaves.leaves_for(out.n_leaves);
  const Tree ltree = ltree_extract(tree, choose_leaves(tree, out.k, rng));
  out.s = total_path_length(ltree) / std::sqrt(static_cast<double>(out.n));
  return out;
}

std::vector<TreeSummary> summarize_all(std::span<const Tree> trees, const SummaryOptions& options,
                                       std::uint64_t seed) {
  std::vector<TreeSummary> out;
  out.reserve(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    RngStream rng(seed, i);
    out.push_back(summarize(trees[i], options, rng));
  }
  return out;
}

bool is_strict_binary(const Tree& tree) {
  if (tree.size() < 2) return false;
  const auto root_degree = tree.out_degree(tree.root());
  if (root_degree != 1 && root_degree != 2) return false;
  for (Tree::Vertex v = 1; v < tree.size(); ++v) {
    const auto d = tree.out_degree(v);
    if (d != 0 && d != 2) return false;
  }
  return true;
}

TreeSummary binary_summary(const Tree& tree) {
  if (!is_strict_binary(tree)) throw NotStrictBinary("tree is not strict binary");
  TreeSummary out;
  out.n = tree.size();
  out.n_leaves = tree.leaf_count();
  out.k = out.n_leaves;
  out.s = total_path_length(tree);
  return out;
}

double log_density_binary(const Tree& tree) { return log_density_ltree(tree, 1.0); }

double log_density_ltree(const Tree& tree, double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("sigma2 must be positive");
  if (!is_strict_binary(tree)) throw NotStrictBinary("tree is not strict binary");
  const auto k = static_cast<double>(tree.leaf_count());
  const double s = total_path_length(tree);
  // prod_{i<k} (2i-1) = (2k-2)! / (2^{k-1} (k-1)!)
  const double log_odd_product =
      std::lgamma(2.0 * k - 1.0) - (k - 1.0) * std::log(2.0) - std::lgamma(k);
  return log_odd_product - (k - 1.0) * std::log(2.0) + k * std::log(sigma2) + std::log(s) -
         0.5 * s * s * sigma2;
}

VarianceEstimate estimate_sigma2_distance(std::span<const double> w) {
  CompensatedSum sum;
  for (const double x : w) sum.add(x * x);
  if (w.empty() || !(sum.value() > 0.0)) {
    throw DegenerateSample("distance-based variance estimate needs a positive distance");
  }
  return {2.0 * static_cast<double>(w.size()) / sum.value(), VarianceMethod::kDistance, w.size()};
}

VarianceEstimate estimate_sigma2_ltree(std::span<const TreeSummary> summaries) {
  CompensatedSum s2;
  double k = 0.0;
  for (const auto& t : summaries) {
    s2.add(t.s * t.s);
    k += static_cast<double>(t.k);
  }
  if (summaries.empty() || !(s2.value() > 0.0)) {
    throw DegenerateSample("L-tree variance estimate needs a positive path length");
  }
  return {2.0 * k / s2.value(), VarianceMethod::kLtree, summaries.size()};
}

namespace {

// Sums over the usable (non single-vertex) summaries of one group.
struct GroupSums {
  double p = 0.0;
  double k = 0.0;
  double w2 = 0.0;
  double s2 = 0.0;
  std::size_t excluded = 0;
};

GroupSums group_sums(std::span<const TreeSummary> summaries) {
  GroupSums g;
  CompensatedSum w2;
  CompensatedSum s2;
  for (const auto& t : summaries) {
    if (t.n <= 1) {
      ++g.excluded;
      continue;
    }
    g.p += 1.0;
    g.k += static_cast<double>(t.k);
    w2.add(t.w * t.w);
    s2.add(t.s * t.s);
  }
  g.w2 = w2.value();
  g.s2 = s2.value();
  if (g.p == 0.0) throw InsufficientData("no tree with more than one vertex");
  if (!(g.w2 > 0.0)) throw DegenerateSample("all random-vertex distances are zero");
  if (!(g.s2 > 0.0)) throw DegenerateSample("all L-tree path lengths are zero");
  return g;
}

double sigma2_distance(const GroupSums& g) { return 2.0 * g.p / g.w2; }
double sigma2_ltree(const GroupSums& g) { return 2.0 * g.k / g.s2; }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

TestReport chi2_report(std::string method, double statistic, double df, double alpha) {
  TestReport r;
  r.method = std::move(method);
  r.statistic = statistic;
  r.reference = Reference::kChi2;
  r.df1 = df;
  r.alpha = alpha;
  r.critical_value = stats::chi2_quantile(1.0 - alpha, df);
  r.p_value = stats::chi2_sf(statistic, df);
  r.reject = statistic > r.critical_value;
  return r;
}

// Mean squares ra (df da) and rb (df db) compared through an F reference.
TestReport f_report(std::string method, double ra, double da, double rb, double db, double alpha,
                    Sidedness sides) {
  TestReport r;
  r.method = std::move(method);
  r.reference = Reference::kF;
  r.alpha = alpha;
  if (sides == Sidedness::kGreater) {
    r.statistic = ra / rb;
    r.df1 = da;
    r.df2 = db;
    r.critical_value = stats::f_quantile(1.0 - alpha, da, db);
    r.p_value = stats::f_sf(r.statistic, da, db);
  } else {
    const bool a_larger = ra >= rb;
    r.statistic = a_larger ? ra / rb : rb / ra;
    r.df1 = a_larger ? da : db;
    r.df2 = a_larger ? db : da;
    r.critical_value = stats::f_quantile(1.0 - 0.5 * alpha, r.df1, r.df2);
    r.p_value = std::min(1.0, 2.0 * stats::f_sf(r.statistic, r.df1, r.df2));
  }
  r.reject = r.statistic > r.critical_value;
  return r;
}

std::vector<TreeSummary> binary_summaries(std::span<const Tree> trees) {
  std::vector<TreeSummary> out;
  out.reserve(trees.size());
  for (const auto& t : trees) out.push_back(binary_summary(t));
  return out;
}

// Binary tests use raw sums only; single-vertex trees cannot occur.
struct BinarySums {
  double k = 0.0;
  double s2 = 0.0;
};

BinarySums binary_sums(std::span<const TreeSummary> summaries) {
  BinarySums b;
  CompensatedSum s2;
  for (const auto& t : summaries) {
    b.k += static_cast<double>(t.k);
    s2.add(t.s * t.s);
  }
  b.s2 = s2.value();
  if (summaries.empty() || !(b.s2 > 0.0)) throw DegenerateSample("binary test needs a nonempty sample");
  return b;
}

std::string format_number(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

TestReport one_sample_binary_test(std::span<const Tree> trees, double alpha) {
  check_alpha(alpha);
  const auto summaries = binary_summaries(trees);
  const BinarySums b = binary_sums(summaries);
  TestReport r = chi2_report("binary-chi2", b.s2, 2.0 * b.k, alpha);
  r.n_trees = {summaries.size()};
  return r;
}

TestReport two_sample_binary_test(std::span<const Tree> trees_a, std::span<const Tree> trees_b,
                                  double alpha, Sidedness sides) {
  check_alpha(alpha);
  const auto sa = binary_summaries(trees_a);
  const auto sb = binary_summaries(trees_b);
  const BinarySums a = binary_sums(sa);
  const BinarySums b = binary_sums(sb);
  TestReport r =
      f_report("binary-F", a.s2 / (2.0 * a.k), 2.0 * a.k, b.s2 / (2.0 * b.k), 2.0 * b.k, alpha, sides);
  r.n_trees = {sa.size(), sb.size()};
  return r;
}

TestReport one_sample_ltree_test(std::span<const TreeSummary> summaries, double alpha,
                                 LtreeReference reference) {
  check_alpha(alpha);
  const GroupSums g = group_sums(summaries);
  const double sigma2 = sigma2_distance(g);
  const double t = sigma2 * g.s2;
  TestReport r;
  if (reference == LtreeReference::kChi2) {
    r = chi2_report("ltree-chi2", t, 2.0 * g.k, alpha);
  } else {
    r.method = "ltree-F1";
    r.reference = Reference::kF;
    r.statistic = t / (2.0 * g.k);
    r.df1 = 2.0 * g.k;
    r.df2 = 2.0 * g.p;
    r.alpha = alpha;
    r.critical_value = stats::f_quantile(1.0 - alpha, r.df1, r.df2);
    r.p_value = stats::f_sf(r.statistic, r.df1, r.df2);
    r.reject = r.statistic > r.critical_value;
  }
  r.sigma2_hat = {sigma2};
  r.n_trees = {static_cast<std::size_t>(g.p)};
  r.n_excluded = g.excluded;
  return r;
}

TestReport two_sample_ltree_test(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                 double alpha, Sidedness sides) {
  check_alpha(alpha);
  const GroupSums ga = group_sums(a);
  const GroupSums gb = group_sums(b);
  const double sa = sigma2_distance(ga);
  const double sb = sigma2_distance(gb);
  TestReport r = f_report("ltree-F", sa * ga.s2 / (2.0 * ga.k), 2.0 * ga.k, sb * gb.s2 / (2.0 * gb.k),
                          2.0 * gb.k, alpha, sides);
  r.sigma2_hat = {sa, sb};
  r.n_trees = {static_cast<std::size_t>(ga.p), static_cast<std::size_t>(gb.p)};
  r.n_excluded = ga.excluded + gb.excluded;
  return r;
}

TestReport one_sample_dyck_test(std::span<const TreeSummary> summaries, double alpha) {
  check_alpha(alpha);
  const GroupSums g = group_sums(summaries);
  const double sigma2 = sigma2_ltree(g);
  TestReport r = chi2_report("dyck-chi2", sigma2 * g.w2, 2.0 * g.p, alpha);
  r.sigma2_hat = {sigma2};
  r.n_trees = {static_cast<std::size_t>(g.p)};
  r.n_excluded = g.excluded;
  return r;
}

TestReport two_sample_dyck_test(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                double alpha, Sidedness sides) {
  check_alpha(alpha);
  const GroupSums ga = group_sums(a);
  const GroupSums gb = group_sums(b);
  const double sa = sigma2_ltree(ga);
  const double sb = sigma2_ltree(gb);
  TestReport r = f_report("dyck-F", sa * ga.w2 / (2.0 * ga.p), 2.0 * ga.p, sb * gb.w2 / (2.0 * gb.p),
                          2.0 * gb.p, alpha, sides);
  r.sigma2_hat = {sa, sb};
  r.n_trees = {static_cast<std::size_t>(ga.p), static_cast<std::size_t>(gb.p)};
  r.n_excluded = ga.excluded + gb.excluded;
  return r;
}

namespace {

struct PooledItem {
  double k;
  double w2;
  double s2;
};

// Oriented mean-square ratio for one split of the pooled sample.
double permutation_statistic(PermutationStatistic kind, const PooledItem& a, double pa,
                             const PooledItem& b, double pb) {
  double ra = 0.0;
  double rb = 0.0;
  switch (kind) {
    case PermutationStatistic::kLtreeF:
      ra = (2.0 * pa / a.w2) * a.s2 / (2.0 * a.k);
      rb = (2.0 * pb / b.w2) * b.s2 / (2.0 * b.k);
      break;
    case PermutationStatistic::kDyckF:
      ra = (2.0 * a.k / a.s2) * a.w2 / (2.0 * pa);
      rb = (2.0 * b.k / b.s2) * b.w2 / (2.0 * pb);
      break;
    case PermutationStatistic::kBinaryF:
      ra = a.s2 / a.k;
      rb = b.s2 / b.k;
      break;
  }
  if (!(ra > 0.0 && rb > 0.0) || !std::isfinite(ra) || !std::isfinite(rb)) {
    return std::numeric_limits<double>::infinity();
  }
  return ra >= rb ? ra / rb : rb / ra;
}

}  // namespace

TestReport permutation_two_sample(std::span<const TreeSummary> a, std::span<const TreeSummary> b,
                                  PermutationStatistic kind, std::size_t n_perm, double alpha,
                                  RngStream& rng) {
  check_alpha(alpha);
  if (n_perm < 100) throw DomainError("permutation tests need at least 100 permutations");

  std::vector<PooledItem> pool;
  std::size_t excluded = 0;
  auto add_group = [&](std::span<const TreeSummary> group) {
    std::size_t used = 0;
    for (const auto& t : group) {
      if (kind != PermutationStatistic::kBinaryF && t.n <= 1) {
        ++excluded;
        continue;
      }
      pool.push_back({static_cast<double>(t.k), t.w * t.w, t.s * t.s});
      ++used;
    }
    return used;
  };
  const std::size_t na = add_group(a);
  const std::size_t nb = add_group(b);
  if (na == 0 || nb == 0) throw InsufficientData("both groups need usable trees");

  PooledItem total{0.0, 0.0, 0.0};
  for (const auto& item : pool) {
    total.k += item.k;
    total.w2 += item.w2;
    total.s2 += item.s2;
  }
  const auto split_statistic = [&](std::span<const PooledItem> first) {
    PooledItem sa{0.0, 0.0, 0.0};
    for (const auto& item : first) {
      sa.k += item.k;
      sa.w2 += item.w2;
      sa.s2 += item.s2;
    }
    const PooledItem sb{total.k - sa.k, total.w2 - sa.w2, total.s2 - sa.s2};
    return permutation_statistic(kind, sa, static_cast<double>(na), sb, static_cast<double>(nb));
  };

  const double observed = split_statistic(std::span<const PooledItem>(pool.data(), na));
  std::vector<double> permuted(n_perm);
  std::vector<PooledItem> work = pool;
  for (std::size_t b_idx = 0; b_idx < n_perm; ++b_idx) {
    for (std::size_t i = 0; i < na; ++i) std::swap(work[i], work[i + rng.below(work.size() - i)]);
    permuted[b_idx] = split_statistic(std::span<const PooledItem>(work.data(), na));
  }

  const auto exceed = static_cast<std::size_t>(
      std::count_if(permuted.begin(), permuted.end(), [&](double x) { return x >= observed; }));

  TestReport r;
  r.method = to_string(kind) + "-perm";
  r.statistic = observed;
  r.reference = Reference::kPermutation;
  r.permutations = n_perm;
  r.alpha = alpha;
  r.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(n_perm) + 1.0);
  const double bound = alpha * (static_cast<double>(n_perm) + 1.0) - 1.0;
  const auto j = static_cast<long long>(std::ceil(bound)) - 1;
  if (j < 0) {
    r.critical_value = std::numeric_limits<double>::infinity();
  } else {
    std::nth_element(permuted.begin(), permuted.begin() + j, permuted.end(), std::greater<>());
    r.critical_value = permuted[static_cast<std::size_t>(j)];
  }
  r.reject = r.statistic > r.critical_value;
  if (kind == PermutationStatistic::kLtreeF) {
    const GroupSums ga = group_sums(a);
    const GroupSums gb = group_sums(b);
    r.sigma2_hat = {sigma2_distance(ga), sigma2_distance(gb)};
  } else if (kind == PermutationStatistic::kDyckF) {
    const GroupSums ga = group_sums(a);
    const GroupSums gb = group_sums(b);
    r.sigma2_hat = {sigma2_ltree(ga), sigma2_ltree(gb)};
  }
  r.n_trees = {na, nb};
  r.n_excluded = excluded;
  return r;
}

std::string to_string(Reference reference) {
  switch (reference) {
    case Reference::kChi2:
      return "chi2";
    case Reference::kF:
      return "F";
    case Reference::kPermutation:
      return "permutation";
  }
  return "unknown";
}

std::string to_string(PermutationStatistic kind) {
  switch (kind) {
    case PermutationStatistic::kLtreeF:
      return "ltree-F";
    case PermutationStatistic::kDyckF:
      return "dyck-F";
    case PermutationStatistic::kBinaryF:
      return "binary-F";
  }
  return "unknown";
}

std::string TestReport::to_key_value() const {
  auto join = [](const auto& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out.push_back(',');
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(values[i])>>) {
        out += format_number(values[i]);
      } else {
        out += std::to_string(values[i]);
      }
    }
    return out;
  };
  std::ostringstream out;
  out << "method=" << method << '\n'
      << "statistic=" << format_number(statistic) << '\n'
      << "reference=" << to_string(reference) << '\n'
      << "df1=" << format_number(df1) << '\n'
      << "df2=" << format_number(df2) << '\n'
      << "permutations=" << permutations << '\n'
      << "critical_value=" << format_number(critical_value) << '\n'
      << "p_value=" << format_number(p_value) << '\n'
      << "alpha=" << format_number(alpha) << '\n'
      << "decision=" << (reject ? "reject" : "retain") << '\n'
      << "sigma2_hat=" << join(sigma2_hat) << '\n'
      << "n_trees=" << join(n_trees) << '\n'
      << "n_excluded=" << n_excluded << '\n';
  return out.str();
}

std::string TestReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["statistic"] = statistic;
  j["reference"] = to_string(reference);
  j["df1"] = df1;
  j["df2"] = df2;
  j["permutations"] = permutations;
  if (std::isfinite(critical_value)) {
    j["critical_value"] = critical_value;
  } else {
    j["critical_value"] = nullptr;
  }
  j["p_value"] = p_value;
  j["alpha"] = alpha;
  j["decision"] = reject ? "reject" : "retain";
  j["sigma2_hat"] = sigma2_hat;
  j["n_trees"] = n_trees;
  j["n_excluded"] = n_excluded;
  return j.dump(2);
}

}  // namespace crt

#include "crtforest/hclust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "crtforest/errors.hpp"

namespace crt {

namespace {

constexpr std::size_t kMatrixLinkageLimit = 5000;

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0U); }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns the new root.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    parent_[b] = a;
    return a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

// A merge of the clusters represented by two leaves, before relabelling.
struct RawMerge {
  std::uint32_t a;
  std::uint32_t b;
  double height;
};

std::vector<RawMerge> single_linkage(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t x, std::uint32_t y) { return values[x] < values[y]; });
  // In one dimension the minimum spanning tree is the chain of sorted values.
  std::vector<std::uint32_t> gaps(n - 1);
  std::iota(gaps.begin(), gaps.end(), 0U);
  auto gap = [&](std::uint32_t i) { return values[order[i + 1]] - values[order[i]]; };
  std::stable_sort(gaps.begin(), gaps.end(),
                   [&](std::uint32_t x, std::uint32_t y) { return gap(x) < gap(y); });
  std::vector<RawMerge> merges;
  merges.reserve(n - 1);
  for (const auto i : gaps) merges.push_back({order[i], order[i + 1], gap(i)});
  return merges;
}

// Condensed upper-triangular distance matrix.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::span<const double> values)
      : n_(values.size()), d_(n_ * (n_ - 1) / 2) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) d_[index(i, j)] = std::abs(values[i] - values[j]);
    }
  }

  double& at(std::size_t i, std::size_t j) { return i < j ? d_[index(i, j)] : d_[index(j, i)]; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }
  std::size_t n_;
  std::vector<double> d_;
};

std::vector<RawMerge> nn_chain(std::span<const double> values, Linkage linkage) {
  const std::size_t n = values.size();
  if (n > kMatrixLinkageLimit) {
    throw DomainError("average and complete linkage are limited to " +
                      std::to_string(kMatrixLinkageLimit) + " values");
  }
  DistanceMatrix d(values);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::uint8_t> active(n, 1);
  std::vector<std::uint32_t> chain;
  std::vector<RawMerge> merges;
  merges.reserve(n - 1);
  std::uint32_t first_active = 0;

  while (merges.size() + 1 < n) {
    if (chain.empty()) {
      while (!active[first_active]) ++first_active;
      chain.push_back(first_active);
    }
    const std::uint32_t a = chain.back();
    const std::uint32_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : a;
    std::uint32_t best = a;
    double best_d = std::numeric_limits<double>::infinity();
    if (prev != a) {
      best = prev;
      best_d = d.at(a, prev);
    }
    for (std::uint32_t x = 0; x < n; ++x) {
      if (!active[x] || x == a) continue;
      const double dx = d.at(a, x);
      if (dx < best_d) {
        best_d = dx;
        best = x;
      }
    }
    if (best != prev || prev == a) {
      chain.push_back(best);
      continue;
    }
    // a and prev are reciprocal nearest neighbours.
    chain.pop_back();
    chain.pop_back();
    const std::uint32_t keep = std::min(a, prev);
    const std::uint32_t drop = std::max(a, prev);
    merges.push_back({keep, drop, best_d});
    for (std::uint32_t x = 0; x < n; ++x) {
      if (!active[x] || x == keep || x == drop) continue;
      double& dk = d.at(keep, x);
      const double dd = d.at(drop, x);
      if (linkage == Linkage::kComplete) {
        dk = std::max(dk, dd);
      } else {
        dk = (static_cast<double>(size[keep]) * dk + static_cast<double>(size[drop]) * dd) /
             static_cast<double>(size[keep] + size[drop]);
      }
    }
    size[keep] += size[drop];
    active[drop] = 0;
  }
  std::stable_sort(merges.begin(), merges.end(),
                   [](const RawMerge& x, const RawMerge& y) { return x.height < y.height; });
  return merges;
}

}  // namespace

Linkage parse_linkage(std::string_view name) {
  if (name == "single") return Linkage::kSingle;
  if (name == "average") return Linkage::kAverage;
  if (name == "complete") return Linkage::kComplete;
  throw DomainError("unknown linkage '" + std::string(name) + "'");
}

Dendrogram agglomerate(std::span<const double> values, Linkage linkage) {
  const std::size_t n = values.size();
  if (n < 2) throw InsufficientData("clustering needs at least two values");
  double lo = values[0];
  double hi = values[0];
  for (const double v : values) {
    if (!std::isfinite(v)) throw DomainError("values must be finite");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  const std::vector<RawMerge> raw =
      linkage == Linkage::kSingle ? single_linkage(values) : nn_chain(values, linkage);

  // Smallest height increment that keeps edges strictly positive.
  const double scale = std::max({hi - lo, std::abs(lo), std::abs(hi), 1.0});
  const double bump = 16.0 * std::numeric_limits<double>::epsilon() * scale;

  Dendrogram out{Tree::single_vertex(), {}, 0};
  DisjointSets sets(n);
  std::vector<std::uint32_t> cluster_of(n);
  std::iota(cluster_of.begin(), cluster_of.end(), 0U);
  std::vector<double> cluster_height(2 * n - 1, 0.0);
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  for (const RawMerge& m : raw) {
    const std::uint32_t ra = sets.find(m.a);
    const std::uint32_t rb = sets.find(m.b);
    const std::uint32_t ca = cluster_of[ra];
    const std::uint32_t cb = cluster_of[rb];
    double h = m.height;
    const double floor = std::max(cluster_height[ca], cluster_height[cb]);
    if (!(h > floor)) {
      h = floor + bump;
      ++out.adjusted_merges;
    }
    const auto id = static_cast<std::uint32_t>(n + merges.size());
    merges.push_back({std::min(ca, cb), std::max(ca, cb), h});
    cluster_height[id] = h;
    cluster_of[sets.unite(ra, rb)] = id;
  }

  out.tree = tree_from_merges(n, merges);
  out.heights.resize(out.tree.size());
  for (Tree::Vertex v = 0; v < out.tree.size(); ++v) {
    out.heights[v] = cluster_height[out.tree.label(v)];
  }
  return out;
}

Heterogeneity heterogeneity_summary(const Dendrogram& dendrogram) {
  return {tree_height(dendrogram.tree), total_path_length(dendrogram.tree),
          dendrogram.tree.edge_count()};
}

}  // namespace crt

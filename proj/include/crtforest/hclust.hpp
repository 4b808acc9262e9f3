#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "crtforest/tree.hpp"

namespace crt {

enum class Linkage { kSingle, kAverage, kComplete };

Linkage parse_linkage(std::string_view name);

/// Ultrametric binary tree from agglomerative clustering. Leaves carry the
/// input index as label; heights are indexed by vertex (leaves at 0).
struct Dendrogram {
  Tree tree;
  std::vector<double> heights;
  /// Merges whose height was raised to keep every edge strictly positive
  /// (ties and duplicate values).
  std::size_t adjusted_merges = 0;
};

/// Clusters scalars under |x - y|. Single linkage runs in O(n log n) on the
/// sorted gaps; average and complete linkage use the nearest-neighbour chain
/// on a full distance matrix and are limited to 5000 values. Equal
/// distances merge the lowest-index pair first. Throws InsufficientData for
/// fewer than two values and DomainError for non-finite input.
Dendrogram agglomerate(std::span<const double> values, Linkage linkage);

struct Heterogeneity {
  double height;
  double total_path_length;
  std::size_t branches;
};

Heterogeneity heterogeneity_summary(const Dendrogram& dendrogram);

}  // namespace crt

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crtforest/rng.hpp"

namespace crt {

/// Rooted ordered tree with strictly positive edge lengths.
///
/// Vertices are numbered 0..n-1 in preorder (children visited left to right),
/// so the root is always 0, every parent has a smaller index than its
/// children, and the children of a vertex appear in increasing index order.
/// Each vertex also carries a stable 64-bit label; freshly generated trees
/// use the preorder index, and ltree_extract() keeps the labels of the
/// vertices it retains so leaf selections stay addressable.
///
/// Immutable after construction.
class Tree {
 public:
  using Vertex = std::uint32_t;
  static constexpr Vertex kNoParent = static_cast<Vertex>(-1);

  /// The minimal tree: a lone root.
  static Tree single_vertex(std::uint64_t label = 0);

  /// Builds a tree from its preorder out-degree sequence (a valid
  /// Lukasiewicz word) and the lengths of the edges above vertices 1..n-1 in
  /// preorder. Throws InvalidTree if the sequence does not describe a tree or
  /// a length is not strictly positive and finite.
  static Tree from_preorder(std::span<const std::uint32_t> out_degrees,
                            std::span<const double> edge_lengths,
                            std::span<const std::uint64_t> labels = {});

  std::size_t size() const noexcept { return parent_.size(); }
  std::size_t edge_count() const noexcept { return parent_.size() - 1; }
  Vertex root() const noexcept { return 0; }

  Vertex parent(Vertex v) const { return parent_[v]; }
  /// Length of the edge from v to its parent; 0 for the root.
  double length(Vertex v) const { return length_[v]; }
  std::uint64_t label(Vertex v) const { return labels_[v]; }
  std::span<const Vertex> children(Vertex v) const {
    return {children_.data() + child_offset_[v], children_.data() + child_offset_[v + 1]};
  }
  std::uint32_t out_degree(Vertex v) const { return child_offset_[v + 1] - child_offset_[v]; }
  bool is_leaf(Vertex v) const { return out_degree(v) == 0; }

  /// Leaves in preorder. A single-vertex tree has its root as only leaf.
  std::vector<Vertex> leaves() const;
  std::size_t leaf_count() const;

  /// Vertex carrying `label`, if any. Linear scan.
  std::optional<Vertex> find_label(std::uint64_t label) const;

  std::span<const Vertex> parents() const { return parent_; }
  std::span<const double> lengths() const { return length_; }
  std::span<const std::uint64_t> labels() const { return labels_; }

  /// Same shape, same child order, bitwise-equal lengths and equal labels.
  friend bool operator==(const Tree& a, const Tree& b);

 private:
  Tree() = default;
  void index_children();

  std::vector<Vertex> parent_;
  std::vector<double> length_;
  std::vector<std::uint64_t> labels_;
  std::vector<std::uint32_t> child_offset_;
  std::vector<Vertex> children_;

  friend class TreeBuilder;
};

/// Incremental construction of a tree in arbitrary insertion order; build()
/// renumbers into preorder. Vertices without an explicit label receive their
/// final preorder index as label.
class TreeBuilder {
 public:
  using Handle = std::uint32_t;

  explicit TreeBuilder(std::optional<std::uint64_t> root_label = std::nullopt);

  Handle root() const { return 0; }
  /// Appends a child to the right of `parent`'s existing children.
  Handle add_child(Handle parent, double length,
                   std::optional<std::uint64_t> label = std::nullopt);
  /// Inserts a new vertex in the middle of the edge above `child`, at distance
  /// `offset_from_parent` below the parent. Returns the new vertex.
  Handle split_edge(Handle child, double offset_from_parent);
  /// Like add_child, but attaches to the left of the existing children.
  Handle add_child_front(Handle parent, double length,
                         std::optional<std::uint64_t> label = std::nullopt);

  double length(Handle h) const { return nodes_[h].length; }
  void set_length(Handle h, double length) { nodes_[h].length = length; }
  void set_label(Handle h, std::uint64_t label) { nodes_[h].label = label; }
  std::size_t size() const { return nodes_.size(); }

  Tree build() const;

 private:
  struct Node {
    Handle parent;
    double length;
    std::optional<std::uint64_t> label;
    std::vector<Handle> children;
  };
  std::vector<Node> nodes_;
};

/// One agglomeration step: clusters `left` and `right` join at `height`.
/// Clusters 0..n-1 are the leaves; merge i creates cluster n + i.
struct Merge {
  std::uint32_t left;
  std::uint32_t right;
  double height;
};

/// Builds the rooted tree of a merge history (the last merge is the root).
/// Leaves sit at height 0 and are labelled with their cluster index, internal
/// vertices with n + merge index; edge lengths are height differences, which
/// must be strictly positive.
Tree tree_from_merges(std::size_t n_leaves, std::span<const Merge> merges);

/// Contour (depth-first) coding of a tree as a unit-speed excursion.
///
/// Stored as the signed sequence of traversed edge lengths: +x going down an
/// edge of length x, -x coming back up. Breakpoints are the prefix sums of
/// |step| (position) and step (height); there is one per vertex visit.
class DyckPath {
 public:
  struct Breakpoint {
    double position;
    double height;
    friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
  };

  DyckPath() = default;
  /// Validates that the steps form an excursion: heights stay >= 0, every
  /// down step retraces the matching up step, and the path ends at 0.
  static DyckPath from_steps(std::vector<double> steps);
  /// Validates slopes of exactly +-1 (to 1e-9 relative) and zero endpoints.
  static DyckPath from_breakpoints(std::span<const Breakpoint> breakpoints);

  std::span<const double> steps() const { return steps_; }
  std::vector<Breakpoint> breakpoints() const;
  /// Domain length: twice the total edge length of the coded tree.
  double domain_length() const;
  /// H(s) by linear interpolation; s is clamped to the domain.
  double height_at(double s) const;

  friend bool operator==(const DyckPath&, const DyckPath&) = default;

 private:
  std::vector<double> steps_;
};

DyckPath dyck_encode(const Tree& tree);
/// Throws MalformedPath for anything that is not an excursion.
Tree dyck_decode(const DyckPath& path);

/// Sum of all edge lengths (compensated summation).
double total_path_length(const Tree& tree);
/// Distance from the root to v. Throws UnknownVertex.
double root_distance(const Tree& tree, Tree::Vertex v);
/// Root distances of all vertices, indexed by vertex.
std::vector<double> root_distances(const Tree& tree);
/// Maximum root distance.
double tree_height(const Tree& tree);

enum class RandomPoint {
  kUniformVertex,      // vertex uniform over all n, root included
  kUniformDyckPosition // uniform position on the contour path
};

/// n^{-1/2} times the root distance of a random point of the tree.
double random_vertex_distance(const Tree& tree, RngStream& rng,
                              RandomPoint mode = RandomPoint::kUniformVertex);

struct LeafSelection {
  std::vector<Tree::Vertex> leaves;  // sorted, distinct
  std::size_t size() const { return leaves.size(); }
};

/// Uniform random k-subset of the leaves. Throws TooManyLeavesRequested when
/// k exceeds the leaf count and DomainError when k == 0.
LeafSelection choose_leaves(const Tree& tree, std::size_t k, RngStream& rng);

/// Selection from leaf labels; throws UnknownVertex for unknown labels.
LeafSelection select_by_label(const Tree& tree, std::span<const std::uint64_t> labels);

/// Least-common-ancestor subtree spanned by the root and the selected
/// leaves: keeps the root, the selected leaves and every branch point of the
/// union of their root paths; non-root vertices with a single retained child
/// are contracted, their edge lengths summed. Labels of retained vertices are
/// preserved. Throws EmptySelection, and InvalidTree if a selected vertex is
/// not a leaf or appears twice.
Tree ltree_extract(const Tree& tree, const LeafSelection& selection);

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace crt

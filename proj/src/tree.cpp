#include "crtforest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crtforest/errors.hpp"

namespace crt {

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

// ---------------------------------------------------------------------------
// Tree

namespace {

void check_length(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw InvalidTree("edge length must be positive and finite, got " + std::to_string(x));
  }
}

}  // namespace

Tree Tree::single_vertex(std::uint64_t label) {
  Tree t;
  t.parent_ = {kNoParent};
  t.length_ = {0.0};
  t.labels_ = {label};
  t.index_children();
  return t;
}

Tree Tree::from_preorder(std::span<const std::uint32_t> out_degrees,
                         std::span<const double> edge_lengths,
                         std::span<const std::uint64_t> labels) {
  const std::size_t n = out_degrees.size();
  if (n == 0) throw InvalidTree("a tree needs at least one vertex");
  if (edge_lengths.size() != n - 1) {
    throw InvalidTree("expected " + std::to_string(n - 1) + " edge lengths, got " +
                      std::to_string(edge_lengths.size()));
  }
  if (!labels.empty() && labels.size() != n) throw InvalidTree("label count mismatch");

  Tree t;
  t.parent_.resize(n);
  t.length_.resize(n);
  t.parent_[0] = kNoParent;
  t.length_[0] = 0.0;

  // Stack of vertices that still expect children, with their remaining count.
  struct Open {
    Vertex v;
    std::uint32_t remaining;
  };
  std::vector<Open> stack;
  stack.push_back({0, out_degrees[0]});
  for (std::size_t i = 1; i < n; ++i) {
    while (!stack.empty() && stack.back().remaining == 0) stack.pop_back();
    if (stack.empty()) {
      throw InvalidTree("out-degree sequence closes the tree before vertex " + std::to_string(i));
    }
    check_length(edge_lengths[i - 1]);
    t.parent_[i] = stack.back().v;
    t.length_[i] = edge_lengths[i - 1];
    --stack.back().remaining;
    stack.push_back({static_cast<Vertex>(i), out_degrees[i]});
  }
  for (const auto& open : stack) {
    if (open.remaining != 0) throw InvalidTree("out-degree sequence leaves unfilled children");
  }

  if (labels.empty()) {
    t.labels_.resize(n);
    std::iota(t.labels_.begin(), t.labels_.end(), std::uint64_t{0});
  } else {
    t.labels_.assign(labels.begin(), labels.end());
  }
  t.index_children();
  return t;
}

void Tree::index_children() {
  const std::size_t n = parent_.size();
  child_offset_.assign(n + 1, 0);
  for (std::size_t v = 1; v < n; ++v) ++child_offset_[parent_[v] + 1];
  for (std::size_t v = 0; v < n; ++v) child_offset_[v + 1] += child_offset_[v];
  children_.resize(n - 1);
  std::vector<std::uint32_t> cursor(child_offset_.begin(), child_offset_.end() - 1);
  for (std::size_t v = 1; v < n; ++v) children_[cursor[parent_[v]]++] = static_cast<Vertex>(v);
}

std::vector<Tree::Vertex> Tree::leaves() const {
  std::vector<Vertex> out;
  for (std::size_t v = 0; v < size(); ++v) {
    if (is_leaf(static_cast<Vertex>(v))) out.push_back(static_cast<Vertex>(v));
  }
  return out;
}

std::size_t Tree::leaf_count() const {
  std::size_t count = 0;
  for (std::size_t v = 0; v < size(); ++v) count += is_leaf(static_cast<Vertex>(v)) ? 1 : 0;
  return count;
}

std::optional<Tree::Vertex> Tree::find_label(std::uint64_t label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<Vertex>(it - labels_.begin());
}

bool operator==(const Tree& a, const Tree& b) {
  return a.parent_ == b.parent_ && a.length_ == b.length_ && a.labels_ == b.labels_;
}

// ---------------------------------------------------------------------------
// TreeBuilder

TreeBuilder::TreeBuilder(std::optional<std::uint64_t> root_label) {
  nodes_.push_back(Node{Tree::kNoParent, 0.0, root_label, {}});
}

TreeBuilder::Handle TreeBuilder::add_child(Handle parent, double length,
                                           std::optional<std::uint64_t> label) {
  const auto h = static_cast<Handle>(nodes_.size());
  nodes_.push_back(Node{parent, length, label, {}});
  nodes_[parent].children.push_back(h);
  return h;
}

TreeBuilder::Handle TreeBuilder::add_child_front(Handle parent, double length,
                                                 std::optional<std::uint64_t> label) {
  const auto h = static_cast<Handle>(nodes_.size());
  nodes_.push_back(Node{parent, length, label, {}});
  auto& siblings = nodes_[parent].children;
  siblings.insert(siblings.begin(), h);
  return h;
}

TreeBuilder::Handle TreeBuilder::split_edge(Handle child, double offset_from_parent) {
  const Handle parent = nodes_[child].parent;
  if (parent == Tree::kNoParent) throw InvalidTree("cannot split above the root");
  const auto mid = static_cast<Handle>(nodes_.size());
  nodes_.push_back(Node{parent, offset_from_parent, std::nullopt, {child}});
  auto& siblings = nodes_[parent].children;
  *std::find(siblings.begin(), siblings.end(), child) = mid;
  nodes_[child].parent = mid;
  nodes_[child].length -= offset_from_parent;
  return mid;
}

Tree TreeBuilder::build() const {
  const std::size_t n = nodes_.size();
  std::vector<std::uint32_t> degrees;
  std::vector<double> lengths;
  std::vector<std::uint64_t> labels;
  degrees.reserve(n);
  lengths.reserve(n - 1);
  labels.reserve(n);

  std::vector<Handle> stack{0};
  while (!stack.empty()) {
    const Handle h = stack.back();
    stack.pop_back();
    const Node& node = nodes_[h];
    if (h != 0) lengths.push_back(node.length);
    degrees.push_back(static_cast<std::uint32_t>(node.children.size()));
    labels.push_back(node.label.value_or(labels.size()));
    for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
  }
  return Tree::from_preorder(degrees, lengths, labels);
}

Tree tree_from_merges(std::size_t n_leaves, std::span<const Merge> merges) {
  if (n_leaves == 0) throw InvalidTree("a merge history needs at least one leaf");
  if (merges.size() + 1 != n_leaves) {
    throw InvalidTree("a merge history over " + std::to_string(n_leaves) + " leaves needs " +
                      std::to_string(n_leaves - 1) + " merges");
  }
  const std::size_t total = n_leaves + merges.size();
  std::vector<double> height(total, 0.0);
  std::vector<std::uint8_t> used(total, 0);
  for (std::size_t i = 0; i < merges.size(); ++i) {
    const Merge& m = merges[i];
    const std::size_t id = n_leaves + i;
    if (m.left >= id || m.right >= id || m.left == m.right || used[m.left] || used[m.right]) {
      throw InvalidTree("merge " + std::to_string(i) + " references an unavailable cluster");
    }
    used[m.left] = used[m.right] = 1;
    height[id] = m.height;
  }

  std::vector<std::uint32_t> degrees;
  std::vector<double> lengths;
  std::vector<std::uint64_t> labels;
  degrees.reserve(total);
  lengths.reserve(total - 1);
  labels.reserve(total);
  std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(total - 1)};
  while (!stack.empty()) {
    const std::uint32_t c = stack.back();
    stack.pop_back();
    labels.push_back(c);
    if (c < n_leaves) {
      degrees.push_back(0);
    } else {
      const Merge& m = merges[c - n_leaves];
      degrees.push_back(2);
      stack.push_back(m.right);
      stack.push_back(m.left);
    }
  }
  std::vector<std::uint32_t> parent_of(total, 0);
  for (std::size_t i = 0; i < merges.size(); ++i) {
    parent_of[merges[i].left] = static_cast<std::uint32_t>(n_leaves + i);
    parent_of[merges[i].right] = static_cast<std::uint32_t>(n_leaves + i);
  }
  for (std::size_t i = 1; i < labels.size(); ++i) {
    const auto c = static_cast<std::uint32_t>(labels[i]);
    lengths.push_back(height[parent_of[c]] - height[c]);
  }
  return Tree::from_preorder(degrees, lengths, labels);
}

// ---------------------------------------------------------------------------
// Dyck paths

namespace {

bool close_enough(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

DyckPath DyckPath::from_steps(std::vector<double> steps) {
  std::vector<double> open;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double s = steps[i];
    if (s == 0.0 || !std::isfinite(s)) {
      throw MalformedPath("step " + std::to_string(i) + " is zero or not finite");
    }
    if (s > 0) {
      open.push_back(s);
    } else {
      if (open.empty()) throw MalformedPath("path goes below zero at step " + std::to_string(i));
      if (!close_enough(-s, open.back())) {
        throw MalformedPath("down step " + std::to_string(i) +
                            " does not retrace the matching up step");
      }
      open.pop_back();
    }
  }
  if (!open.empty()) throw MalformedPath("path does not return to height 0");
  DyckPath p;
  p.steps_ = std::move(steps);
  return p;
}

DyckPath DyckPath::from_breakpoints(std::span<const Breakpoint> breakpoints) {
  if (breakpoints.empty()) throw MalformedPath("no breakpoints");
  if (breakpoints.front().position != 0.0 || breakpoints.front().height != 0.0) {
    throw MalformedPath("path must start at (0, 0)");
  }
  if (breakpoints.back().height != 0.0) throw MalformedPath("path must end at height 0");
  std::vector<double> steps;
  steps.reserve(breakpoints.size() - 1);
  // Down steps reuse the magnitude of their matching up step; positions and
  // heights are prefix sums whose differences carry rounding.
  std::vector<double> open;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const Breakpoint& a = breakpoints[i - 1];
    const Breakpoint& b = breakpoints[i];
    const double dp = b.position - a.position;
    const double dh = b.height - a.height;
    const double scale = std::max({std::abs(a.position), std::abs(b.position), std::abs(a.height),
                                   std::abs(b.height)});
    if (!(dp > 0.0)) throw MalformedPath("positions must increase at breakpoint " + std::to_string(i));
    if (std::abs(std::abs(dh) - dp) > 1e-9 * dp + 8 * 2.2e-16 * scale) {
      throw MalformedPath("slope is not +-1 between breakpoints " + std::to_string(i - 1) +
                          " and " + std::to_string(i));
    }
    if (b.height < 0.0) throw MalformedPath("negative height at breakpoint " + std::to_string(i));
    if (dh > 0) {
      steps.push_back(dh);
      open.push_back(dh);
    } else {
      if (open.empty()) throw MalformedPath("path goes below zero at breakpoint " + std::to_string(i));
      if (std::abs(-dh - open.back()) > 1e-9 * open.back() + 8 * 2.2e-16 * scale) {
        throw MalformedPath("down step " + std::to_string(i - 1) +
                            " does not retrace the matching up step");
      }
      steps.push_back(-open.back());
      open.pop_back();
    }
  }
  return from_steps(std::move(steps));
}

std::vector<DyckPath::Breakpoint> DyckPath::breakpoints() const {
  std::vector<Breakpoint> out;
  out.reserve(steps_.size() + 1);
  out.push_back({0.0, 0.0});
  // Heights are tracked with a stack so that returning to a vertex restores
  // exactly the height it had on the way down.
  std::vector<double> heights{0.0};
  CompensatedSum position;
  for (const double s : steps_) {
    position.add(std::abs(s));
    if (s > 0) {
      heights.push_back(heights.back() + s);
    } else {
      heights.pop_back();
    }
    out.push_back({position.value(), heights.back()});
  }
  return out;
}

double DyckPath::domain_length() const {
  CompensatedSum total;
  for (const double s : steps_) total.add(std::abs(s));
  return total.value();
}

double DyckPath::height_at(double s) const {
  const auto bps = breakpoints();
  if (s <= 0.0 || bps.size() == 1) return 0.0;
  if (s >= bps.back().position) return bps.back().height;
  const auto it = std::upper_bound(bps.begin(), bps.end(), s,
                                   [](double x, const Breakpoint& b) { return x < b.position; });
  const Breakpoint& hi = *it;
  const Breakpoint& lo = *(it - 1);
  const double slope = hi.height >= lo.height ? 1.0 : -1.0;
  return lo.height + slope * (s - lo.position);
}

DyckPath dyck_encode(const Tree& tree) {
  std::vector<double> steps;
  steps.reserve(2 * tree.edge_count());
  Tree::Vertex current = tree.root();
  for (Tree::Vertex v = 1; v < tree.size(); ++v) {
    while (current != tree.parent(v)) {
      steps.push_back(-tree.length(current));
      current = tree.parent(current);
    }
    steps.push_back(tree.length(v));
    current = v;
  }
  while (current != tree.root()) {
    steps.push_back(-tree.length(current));
    current = tree.parent(current);
  }
  return DyckPath::from_steps(std::move(steps));
}

Tree dyck_decode(const DyckPath& path) {
  // Up steps create vertices in preorder; the out-degree of each vertex is
  // the number of up steps taken while it is on top of the stack.
  std::vector<std::uint32_t> degrees{0};
  std::vector<double> lengths;
  std::vector<Tree::Vertex> stack{0};
  for (const double s : path.steps()) {
    if (s > 0) {
      ++degrees[stack.back()];
      stack.push_back(static_cast<Tree::Vertex>(degrees.size()));
      degrees.push_back(0);
      lengths.push_back(s);
    } else {
      if (stack.size() < 2) throw MalformedPath("path goes below zero");
      stack.pop_back();
    }
  }
  if (stack.size() != 1) throw MalformedPath("path does not return to height 0");
  return Tree::from_preorder(degrees, lengths);
}

// ---------------------------------------------------------------------------
// Metrics

double total_path_length(const Tree& tree) {
  CompensatedSum sum;
  for (std::size_t v = 1; v < tree.size(); ++v) sum.add(tree.length(static_cast<Tree::Vertex>(v)));
  return sum.value();
}

double root_distance(const Tree& tree, Tree::Vertex v) {
  if (v >= tree.size()) throw UnknownVertex("vertex " + std::to_string(v) + " is not in the tree");
  // Summed root-first, matching root_distances().
  std::vector<Tree::Vertex> path;
  for (Tree::Vertex u = v; u != tree.root(); u = tree.parent(u)) path.push_back(u);
  double d = 0.0;
  for (auto it = path.rbegin(); it != path.rend(); ++it) d += tree.length(*it);
  return d;
}

std::vector<double> root_distances(const Tree& tree) {
  std::vector<double> depth(tree.size(), 0.0);
  for (std::size_t v = 1; v < tree.size(); ++v) {
    depth[v] = depth[tree.parent(static_cast<Tree::Vertex>(v))] + tree.length(static_cast<Tree::Vertex>(v));
  }
  return depth;
}

double tree_height(const Tree& tree) {
  const auto depth = root_distances(tree);
  return *std::max_element(depth.begin(), depth.end());
}

double random_vertex_distance(const Tree& tree, RngStream& rng, RandomPoint mode) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(tree.size()));
  if (tree.size() == 1) return 0.0;
  if (mode == RandomPoint::kUniformVertex) {
    const auto v = static_cast<Tree::Vertex>(rng.below(tree.size()));
    return scale * root_distance(tree, v);
  }
  const DyckPath path = dyck_encode(tree);
  return scale * path.height_at(rng.uniform() * path.domain_length());
}

// ---------------------------------------------------------------------------
// Leaf selection and L-trees

LeafSelection choose_leaves(const Tree& tree, std::size_t k, RngStream& rng) {
  if (k == 0) throw DomainError("at least one leaf must be chosen");
  std::vector<Tree::Vertex> leaves = tree.leaves();
  if (k > leaves.size()) {
    throw TooManyLeavesRequested("requested " + std::to_string(k) + " leaves but the tree has " +
                                 std::to_string(leaves.size()));
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(leaves.size() - i);
    std::swap(leaves[i], leaves[j]);
  }
  leaves.resize(k);
  std::sort(leaves.begin(), leaves.end());
  return LeafSelection{std::move(leaves)};
}

LeafSelection select_by_label(const Tree& tree, std::span<const std::uint64_t> labels) {
  LeafSelection sel;
  for (const auto label : labels) {
    const auto v = tree.find_label(label);
    if (!v) throw UnknownVertex("no vertex labelled " + std::to_string(label));
    sel.leaves.push_back(*v);
  }
  std::sort(sel.leaves.begin(), sel.leaves.end());
  return sel;
}

Tree ltree_extract(const Tree& tree, const LeafSelection& selection) {
  if (selection.leaves.empty()) throw EmptySelection("leaf selection is empty");
  const std::size_t n = tree.size();

  std::vector<std::uint32_t> marked_children(n, 0);
  std::vector<std::uint8_t> marked(n, 0);
  std::vector<std::uint8_t> kept(n, 0);
  marked[tree.root()] = 1;
  kept[tree.root()] = 1;
  for (const Tree::Vertex leaf : selection.leaves) {
    if (leaf >= n) throw UnknownVertex("vertex " + std::to_string(leaf) + " is not in the tree");
    if (!tree.is_leaf(leaf)) throw InvalidTree("vertex " + std::to_string(leaf) + " is not a leaf");
    if (kept[leaf] && leaf != tree.root()) {
      throw InvalidTree("leaf " + std::to_string(leaf) + " selected twice");
    }
    kept[leaf] = 1;
    for (Tree::Vertex v = leaf; !marked[v]; v = tree.parent(v)) {
      marked[v] = 1;
      ++marked_children[tree.parent(v)];
    }
  }

  // Nearest retained ancestor and compensated distance to it; parents come
  // before children in preorder, so one ascending pass suffices.
  std::vector<Tree::Vertex> anchor(n, Tree::kNoParent);
  std::vector<CompensatedSum> gap(n);
  std::vector<std::uint32_t> new_id(n, 0);
  std::vector<std::uint32_t> degrees;
  std::vector<double> lengths;
  std::vector<std::uint64_t> labels;
  degrees.push_back(0);
  labels.push_back(tree.label(tree.root()));
  for (Tree::Vertex v = 1; v < n; ++v) {
    if (!marked[v]) continue;
    const Tree::Vertex p = tree.parent(v);
    if (kept[p]) {
      anchor[v] = p;
      gap[v] = CompensatedSum{};
    } else {
      anchor[v] = anchor[p];
      gap[v] = gap[p];
    }
    gap[v].add(tree.length(v));
    if (marked_children[v] >= 2) kept[v] = 1;
    if (!kept[v]) continue;
    new_id[v] = static_cast<std::uint32_t>(degrees.size());
    ++degrees[new_id[anchor[v]]];
    degrees.push_back(0);
    lengths.push_back(gap[v].value());
    labels.push_back(tree.label(v));
  }
  return Tree::from_preorder(degrees, lengths, labels);
}

}  // namespace crt

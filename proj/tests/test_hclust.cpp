#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "crtforest/errors.hpp"
#include "crtforest/hclust.hpp"
#include "test_util.hpp"

using crt::Linkage;
using crt::Tree;

namespace {

// Naive agglomeration: recompute every cluster distance from scratch.
std::vector<double> naive_heights(const std::vector<double>& values, Linkage linkage) {
  std::vector<std::vector<double>> clusters;
  for (const double v : values) clusters.push_back({v});
  std::vector<double> heights;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double d = linkage == Linkage::kSingle ? std::numeric_limits<double>::infinity() : 0.0;
        for (const double x : clusters[i]) {
          for (const double y : clusters[j]) {
            const double e = std::abs(x - y);
            if (linkage == Linkage::kSingle) d = std::min(d, e);
            if (linkage == Linkage::kComplete) d = std::max(d, e);
            if (linkage == Linkage::kAverage) d += e;
          }
        }
        if (linkage == Linkage::kAverage) d /= static_cast<double>(clusters[i].size() * clusters[j].size());
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    heights.push_back(best);
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<long>(bj));
  }
  std::sort(heights.begin(), heights.end());
  return heights;
}

std::vector<double> internal_heights(const crt::Dendrogram& d) {
  std::vector<double> h;
  for (Tree::Vertex v = 0; v < d.tree.size(); ++v) {
    if (!d.tree.is_leaf(v)) h.push_back(d.heights[v]);
  }
  std::sort(h.begin(), h.end());
  return h;
}

}  // namespace

TEST_CASE("three points under each linkage") {
  const std::vector<double> values{0.0, 1.0, 3.0};
  const std::pair<Linkage, double> cases[] = {
      {Linkage::kSingle, 2.0}, {Linkage::kComplete, 3.0}, {Linkage::kAverage, 2.5}};
  for (const auto& [linkage, top] : cases) {
    const auto d = crt::agglomerate(values, linkage);
    CHECK(d.tree.size() == 5);
    CHECK(d.heights[0] == top);
    CHECK(crt::tree_height(d.tree) == top);
    CHECK(d.adjusted_merges == 0);
    // The first merge joins 0 and 1 at height 1.
    CHECK(internal_heights(d) == std::vector<double>{1.0, top});
    const auto h = crt::heterogeneity_summary(d);
    CHECK(h.height == top);
    CHECK(h.branches == 4);
    CHECK(h.total_path_length == doctest::Approx(1.0 + 1.0 + (top - 1.0) + top));
  }
}

TEST_CASE("dendrograms are ultrametric binary trees") {
  crt::RngStream rng(71, 0);
  for (const auto linkage : {Linkage::kSingle, Linkage::kAverage, Linkage::kComplete}) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> values;
      const std::size_t n = 2 + rng.below(60);
      for (std::size_t i = 0; i < n; ++i) values.push_back(rng.uniform(-5, 5));
      const auto d = crt::agglomerate(values, linkage);
      CHECK(d.tree.leaf_count() == n);
      CHECK(d.tree.size() == 2 * n - 1);
      const double h = crt::tree_height(d.tree);
      for (Tree::Vertex v = 0; v < d.tree.size(); ++v) {
        if (d.tree.is_leaf(v)) {
          REQUIRE(crt::root_distance(d.tree, v) == doctest::Approx(h).epsilon(1e-12));
          REQUIRE(d.tree.label(v) < n);
        } else {
          REQUIRE(d.tree.out_degree(v) == 2);
        }
      }
      const auto expected = naive_heights(values, linkage);
      const auto got = internal_heights(d);
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("duplicates and ties stay strictly positive") {
  const std::vector<double> values{2.0, 2.0, 2.0, 5.0, 5.0};
  for (const auto linkage : {Linkage::kSingle, Linkage::kAverage, Linkage::kComplete}) {
    const auto d = crt::agglomerate(values, linkage);
    CHECK(d.adjusted_merges >= 2);
    for (Tree::Vertex v = 1; v < d.tree.size(); ++v) CHECK(d.tree.length(v) > 0.0);
    CHECK(d.heights[0] == doctest::Approx(3.0));
  }
  const std::vector<double> evenly{0.0, 1.0, 2.0, 3.0};
  const auto d = crt::agglomerate(evenly, Linkage::kSingle);
  CHECK(d.adjusted_merges == 2);
}

TEST_CASE("large single-linkage inputs") {
  crt::RngStream rng(72, 0);
  std::vector<double> values;
  for (int i = 0; i < 200000; ++i) values.push_back(rng.uniform());
  const auto d = crt::agglomerate(values, Linkage::kSingle);
  CHECK(d.tree.leaf_count() == 200000);
}

TEST_CASE("clustering errors") {
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(crt::agglomerate(one, Linkage::kSingle), crt::InsufficientData);
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(crt::agglomerate(bad, Linkage::kAverage), crt::DomainError);
  const std::vector<double> many(5001, 0.5);
  CHECK_THROWS_AS(crt::agglomerate(many, Linkage::kComplete), crt::DomainError);
  CHECK(crt::parse_linkage("average") == Linkage::kAverage);
  CHECK_THROWS_AS(crt::parse_linkage("ward"), crt::DomainError);
}

// Explicit branch-graph representation of a tubular structure: node
// coordinates (possibly fractional) plus an undirected simple edge set.
#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tube/raster.hpp"

namespace tube {

// Node position in pixel space; fractional values are allowed because
// predicted nodes are continuous before rasterisation.
struct NodePoint {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const NodePoint&, const NodePoint&) = default;
};

struct TubeGraph {
  int height = 0;
  int width = 0;
  std::vector<NodePoint> nodes;
  // Unordered node-index pairs, stored canonically as first < second.
  std::vector<std::pair<int, int>> edges;

  // Rewrites every edge as (min, max), sorts lexicographically and drops
  // duplicates. Self-loops are rejected.
  void canonicalize() {
    for (auto& e : edges) {
      if (e.first == e.second) {
        throw std::invalid_argument("TubeGraph: self-loop on node " +
                                    std::to_string(e.first));
      }
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }

  // Checks all structural invariants; throws std::invalid_argument on the
  // first violation.
  void validate() const {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("TubeGraph: dimensions must be >= 1");
    }
    for (size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (!(n.row >= 0.0 && n.row < height && n.col >= 0.0 && n.col < width)) {
        throw std::invalid_argument("TubeGraph: node " + std::to_string(i) +
                                    " outside raster bounds");
      }
    }
    const int node_count = static_cast<int>(nodes.size());
    for (const auto& e : edges) {
      if (e.first < 0 || e.second < 0 || e.first >= node_count ||
          e.second >= node_count) {
        throw std::invalid_argument("TubeGraph: edge index out of range");
      }
      if (e.first == e.second) {
        throw std::invalid_argument("TubeGraph: self-loop on node " +
                                    std::to_string(e.first));
      }
    }
  }

  friend bool operator==(const TubeGraph&, const TubeGraph&) = default;
};

}  // namespace tube

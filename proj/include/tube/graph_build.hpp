// Builds the explicit branch graph of a skeletonized mask. Junction pixels
// (neighbour count >= 3) are clustered and merged to a single node, branches
// are traced as runs of path points (neighbour count 2), then self-loops and
// parallel pathways are broken up by inserting extra nodes so the final
// graph is simple.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tube/graph.hpp"
#include "tube/raster.hpp"
#include "tube/skeleton.hpp"

namespace tube {

// One traced pathway: the ordered interior pixels (exclusive of both node
// pixels) connecting nodes a and b. Oriented from a to b with a <= b.
struct BranchTrace {
  int a = 0;
  int b = 0;
  std::vector<Coord> interior;
};

// Pixel-level account of the construction: which pixels each node owns
// (merged junction clusters own several) and every traced pathway. The
// union of node pixels and interiors equals the input foreground exactly.
struct RawTrace {
  std::vector<std::vector<Coord>> node_pixels;
  std::vector<BranchTrace> branches;
};

struct BuildResult {
  TubeGraph graph;
  RawTrace trace;
};

namespace detail {

// Thin means stable under another thinning pass. Junction clusters may
// legitimately contain 2x2 blocks; anything a further pass would erode is
// not a skeleton.
inline bool is_thin(const Mask& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      if (zhang_suen_removable(m, r, c, false) ||
          zhang_suen_removable(m, r, c, true)) {
        return false;
      }
    }
  }
  return true;
}

inline int round_half_up(double t) {
  return static_cast<int>(std::floor(t + 0.5));
}

}  // namespace detail

inline BuildResult build_graph(const Mask& centerline) {
  if (!detail::is_thin(centerline)) {
    throw std::invalid_argument(
        "build_graph: input is not thin (a further thinning pass would "
        "remove pixels); skeletonize it first");
  }

  const int rows = centerline.rows();
  const int cols = centerline.cols();

  Grid<int> ncount(rows, cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (centerline(r, c)) ncount(r, c) = neighbor_count(centerline, {r, c});
    }
  }

  // Cluster junction pixels (8-connected) and pick each cluster's
  // representative: the member nearest the cluster centroid, ties resolved
  // toward the smallest (row, col).
  Grid<int> node_id(rows, cols, -1);
  std::vector<std::vector<Coord>> node_pixels;
  std::vector<Coord> representatives;

  Grid<std::uint8_t> clustered(rows, cols, std::uint8_t{0});
  std::vector<std::pair<Coord, std::vector<Coord>>> initial_nodes;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!centerline(r, c) || ncount(r, c) < 3 || clustered(r, c)) continue;
      std::vector<Coord> members;
      std::vector<Coord> stack{{r, c}};
      clustered(r, c) = 1;
      while (!stack.empty()) {
        const Coord p = stack.back();
        stack.pop_back();
        members.push_back(p);
        for (const auto& d : kNeighbours8) {
          const Coord q{p.row + d.row, p.col + d.col};
          if (centerline.fg(q) && ncount(q) >= 3 && !clustered(q)) {
            clustered(q) = 1;
            stack.push_back(q);
          }
        }
      }
      std::sort(members.begin(), members.end());
      double cr = 0.0, cc = 0.0;
      for (const auto& p : members) {
        cr += p.row;
        cc += p.col;
      }
      cr /= static_cast<double>(members.size());
      cc /= static_cast<double>(members.size());
      Coord best = members.front();
      double best_d2 = 1e300;
      for (const auto& p : members) {
        const double d2 = (p.row - cr) * (p.row - cr) + (p.col - cc) * (p.col - cc);
        if (d2 + 1e-12 < best_d2) {
          best_d2 = d2;
          best = p;
        }
      }
      initial_nodes.emplace_back(best, std::move(members));
    }
  }
  // Endpoints and isolated pixels are single-pixel nodes.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (centerline(r, c) && ncount(r, c) <= 1) {
        initial_nodes.push_back({{r, c}, {{r, c}}});
      }
    }
  }
  std::sort(initial_nodes.begin(), initial_nodes.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  auto add_node = [&](Coord rep, std::vector<Coord> members) {
    const int id = static_cast<int>(representatives.size());
    representatives.push_back(rep);
    for (const auto& p : members) node_id(p) = id;
    node_pixels.push_back(std::move(members));
    return id;
  };
  for (auto& [rep, members] : initial_nodes) add_node(rep, std::move(members));

  // Trace pathways. A non-node foreground pixel always has exactly two
  // foreground neighbours, so each walk is forced.
  Grid<std::uint8_t> visited(rows, cols, std::uint8_t{0});
  std::vector<BranchTrace> raw;
  std::set<std::pair<int, int>> contact_seen;

  auto walk = [&](int from_id, Coord start_member, Coord first) {
    std::vector<Coord> interior;
    Coord prev = start_member;
    Coord cur = first;
    while (true) {
      visited(cur) = 1;
      interior.push_back(cur);
      Coord next{-1, -1};
      for (const auto& d : kNeighbours8) {
        const Coord q{cur.row + d.row, cur.col + d.col};
        if (centerline.fg(q) && q != prev) {
          next = q;
          break;
        }
      }
      if (next.row < 0) {
        throw std::logic_error("build_graph: pathway walk lost its way");
      }
      if (node_id(next) >= 0) {
        raw.push_back({from_id, node_id(next), std::move(interior)});
        return;
      }
      if (visited(next)) {
        throw std::logic_error("build_graph: pathway re-entered itself");
      }
      prev = cur;
      cur = next;
    }
  };

  const int initial_count = static_cast<int>(representatives.size());
  for (int id = 0; id < initial_count; ++id) {
    for (const auto& member : node_pixels[id]) {
      for (const auto& d : kNeighbours8) {
        const Coord q{member.row + d.row, member.col + d.col};
        if (!centerline.fg(q)) continue;
        const int qid = node_id(q);
        if (qid >= 0) {
          if (qid != id) {
            const auto key = std::minmax(id, qid);
            if (contact_seen.insert({key.first, key.second}).second) {
              raw.push_back({id, qid, {}});
            }
          }
        } else if (!visited(q)) {
          walk(id, member, q);
        }
      }
    }
  }

  // Pure cycles have no junctions or endpoints; seed each with a node at
  // its lexicographically smallest pixel, then trace the loop.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!centerline(r, c) || node_id(r, c) >= 0 || visited(r, c)) continue;
      const int id = add_node({r, c}, {{r, c}});
      for (const auto& d : kNeighbours8) {
        const Coord q{r + d.row, c + d.col};
        if (centerline.fg(q) && node_id(q) < 0 && !visited(q)) {
          walk(id, {r, c}, q);
        }
      }
    }
  }

  // Canonical orientation: interiors run from the smaller node index.
  for (auto& br : raw) {
    if (br.a > br.b) {
      std::swap(br.a, br.b);
      std::reverse(br.interior.begin(), br.interior.end());
    }
  }

  // Resolve self-loops by inserting nodes near 1/3 and 2/3 of the pathway.
  std::vector<BranchTrace> resolved;
  resolved.reserve(raw.size());
  for (auto& br : raw) {
    if (br.a != br.b) {
      resolved.push_back(std::move(br));
      continue;
    }
    const int len = static_cast<int>(br.interior.size());
    if (len == 0) continue;
    if (len == 1) {
      const int m = add_node(br.interior[0], {br.interior[0]});
      resolved.push_back({std::min(br.a, m), std::max(br.a, m), {}});
      continue;
    }
    int i1 = detail::round_half_up((len - 1) / 3.0);
    int i2 = detail::round_half_up(2.0 * (len - 1) / 3.0);
    if (i2 <= i1) i2 = i1 + 1;
    const int m1 = add_node(br.interior[i1], {br.interior[i1]});
    const int m2 = add_node(br.interior[i2], {br.interior[i2]});
    auto slice = [&](int lo, int hi) {
      return std::vector<Coord>(br.interior.begin() + lo,
                                br.interior.begin() + hi);
    };
    resolved.push_back({br.a, m1, slice(0, i1)});
    resolved.push_back({m1, m2, slice(i1 + 1, i2)});
    resolved.push_back({m2, br.a, slice(i2 + 1, len)});
  }
  for (auto& br : resolved) {
    if (br.a > br.b) {
      std::swap(br.a, br.b);
      std::reverse(br.interior.begin(), br.interior.end());
    }
  }

  // Resolve multiple edges: keep one pathway per node pair and split every
  // further pathway at its middle path point.
  std::map<std::pair<int, int>, std::vector<size_t>> by_pair;
  for (size_t i = 0; i < resolved.size(); ++i) {
    by_pair[{resolved[i].a, resolved[i].b}].push_back(i);
  }
  std::vector<BranchTrace> final_branches;
  final_branches.reserve(resolved.size());
  for (auto& [pair, idxs] : by_pair) {
    std::sort(idxs.begin(), idxs.end(), [&](size_t x, size_t y) {
      const auto& ix = resolved[x].interior;
      const auto& iy = resolved[y].interior;
      if (ix.size() != iy.size()) return ix.size() < iy.size();
      return ix < iy;
    });
    bool first = true;
    for (const size_t i : idxs) {
      auto& br = resolved[i];
      if (first) {
        final_branches.push_back(std::move(br));
        first = false;
        continue;
      }
      const int len = static_cast<int>(br.interior.size());
      if (len == 0) continue;  // duplicate contact between the same nodes
      const int mid = (len - 1) / 2;
      const int m = add_node(br.interior[mid], {br.interior[mid]});
      std::vector<Coord> left(br.interior.begin(), br.interior.begin() + mid);
      std::vector<Coord> right(br.interior.begin() + mid + 1,
                               br.interior.end());
      final_branches.push_back({std::min(br.a, m), std::max(br.a, m),
                                br.a < m ? std::move(left)
                                         : std::vector<Coord>(left.rbegin(),
                                                              left.rend())});
      final_branches.push_back({std::min(m, br.b), std::max(m, br.b),
                                m < br.b ? std::move(right)
                                         : std::vector<Coord>(right.rbegin(),
                                                              right.rend())});
    }
  }
  std::sort(final_branches.begin(), final_branches.end(),
            [](const BranchTrace& x, const BranchTrace& y) {
              if (x.a != y.a) return x.a < y.a;
              if (x.b != y.b) return x.b < y.b;
              return x.interior < y.interior;
            });

  BuildResult out;
  out.graph.height = rows;
  out.graph.width = cols;
  for (const auto& rep : representatives) {
    out.graph.nodes.push_back({static_cast<double>(rep.row),
                               static_cast<double>(rep.col)});
  }
  for (const auto& br : final_branches) {
    out.graph.edges.emplace_back(br.a, br.b);
  }
  out.graph.canonicalize();
  out.graph.validate();
  out.trace.node_pixels = std::move(node_pixels);
  out.trace.branches = std::move(final_branches);
  return out;
}

}  // namespace tube

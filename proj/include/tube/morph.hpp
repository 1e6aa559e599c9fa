// Rasterises a branch graph into a single-pixel-wide centerline mask by
// searching a cost-minimal skeleton-constrained path for every edge
// (SkeletonDijkstra), with an average-cost acceptance threshold. Includes
// the sliding-window driver that morphs per-window graphs and ORs the
// partial masks into the full-size result.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tube/graph.hpp"
#include "tube/io.hpp"
#include "tube/parallel.hpp"
#include "tube/raster.hpp"

namespace tube {

// A skeleton-feasible path: consecutive points are 8-adjacent, no point
// repeats, and each appended point had at most one 8-neighbour among the
// points before it. total_cost sums the cost map over points[1..].
struct PixelPath {
  std::vector<Coord> points;
  double total_cost = 0.0;
};

// Validates every PixelPath invariant. When `cost` is given, total_cost is
// checked against it as well (exact comparison; the same summation order).
inline bool is_valid_pixel_path(const PixelPath& p,
                                const ProbMap* cost = nullptr) {
  if (p.points.empty()) return false;
  for (size_t k = 1; k < p.points.size(); ++k) {
    if (!are_8_adjacent(p.points[k - 1], p.points[k])) return false;
    int in_prefix = 0;
    for (size_t j = 0; j < k; ++j) {
      if (p.points[j] == p.points[k]) return false;
      if (are_8_adjacent(p.points[j], p.points[k])) ++in_prefix;
    }
    if (in_prefix > 1) return false;
  }
  if (cost) {
    if (!cost->in_bounds(p.points.front())) return false;
    double acc = 0.0;
    for (size_t k = 1; k < p.points.size(); ++k) {
      if (!cost->in_bounds(p.points[k])) return false;
      acc += (*cost)(p.points[k]);
    }
    if (acc != p.total_cost) return false;
  }
  return true;
}

struct MorphConfig {
  double p_thresh = 0.5;
};

// Outcome of one edge search. At most one of threshold_rejected /
// unreachable is set when the path is absent.
struct PathSearchResult {
  std::optional<PixelPath> path;
  bool threshold_rejected = false;
};

namespace detail {

struct QueueEntry {
  double cost;
  std::vector<Coord> points;
};

// Min-order: cost, then path length, then lexicographic path.
struct EntryWorse {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.points.size() != b.points.size()) {
      return a.points.size() > b.points.size();
    }
    return b.points < a.points;
  }
};

}  // namespace detail

// Best-first search over pixel paths ordered by total cost. Each candidate
// neighbour extends its own copy of the popped path; a coordinate joins the
// visited set when popped and may never be appended afterwards. When the
// end point pops, the path is returned unless its average per-pixel cost
// exceeds p_thresh, in which case the search gives up (no cheaper feasible
// path can pop later).
inline PathSearchResult skeleton_dijkstra_ex(Coord s, Coord e,
                                             const ProbMap& cost,
                                             double p_thresh) {
  if (!cost.in_bounds(s) || !cost.in_bounds(e)) {
    throw std::out_of_range("skeleton_dijkstra: endpoint out of bounds");
  }
  std::priority_queue<detail::QueueEntry, std::vector<detail::QueueEntry>,
                      detail::EntryWorse>
      queue;
  queue.push({0.0, {s}});
  Grid<std::uint8_t> visited(cost.rows(), cost.cols(), std::uint8_t{0});

  while (!queue.empty()) {
    detail::QueueEntry entry = queue.top();
    queue.pop();
    const Coord curr = entry.points.back();
    visited(curr) = 1;

    if (curr == e) {
      const double avg = entry.cost / static_cast<double>(entry.points.size());
      if (avg > p_thresh) return {std::nullopt, true};
      return {PixelPath{std::move(entry.points), entry.cost}, false};
    }

    for (const auto& d : kNeighbours8) {
      const Coord n{curr.row + d.row, curr.col + d.col};
      if (!cost.in_bounds(n) || visited(n)) continue;
      int neis_in_path = 0;
      for (const auto& p : entry.points) {
        if (are_8_adjacent(p, n)) {
          if (++neis_in_path > 1) break;
        }
      }
      if (neis_in_path > 1) continue;
      detail::QueueEntry next{entry.cost + cost(n), entry.points};
      next.points.push_back(n);
      queue.push(std::move(next));
    }
  }
  return {std::nullopt, false};
}

inline std::optional<PixelPath> skeleton_dijkstra(Coord s, Coord e,
                                                  const ProbMap& cost,
                                                  double p_thresh) {
  return skeleton_dijkstra_ex(s, e, cost, p_thresh).path;
}

// Per-edge record of a morph run, for threshold-behaviour analysis.
struct EdgeRun {
  int a = 0;
  int b = 0;
  bool accepted = false;
  bool threshold_rejected = false;
  double total_cost = 0.0;
  size_t path_len = 0;
};

struct MorphRun {
  Mask mask;
  std::vector<EdgeRun> edges;
};

namespace detail {

inline Coord round_node(const NodePoint& n, int rows, int cols) {
  // Half-up per axis, clamped into the raster.
  int r = static_cast<int>(std::floor(n.row + 0.5));
  int c = static_cast<int>(std::floor(n.col + 0.5));
  r = std::clamp(r, 0, rows - 1);
  c = std::clamp(c, 0, cols - 1);
  return {r, c};
}

}  // namespace detail

// Alg.-style morph: cost map is the probability complement, edges are
// processed in canonical order and accepted paths are unioned into the
// output mask. Edge searches are independent, so they may run on several
// threads without changing the result.
inline MorphRun morph_run(const TubeGraph& g, const ProbMap& p_m,
                          const MorphConfig& cfg, int threads = 1) {
  if (g.height != p_m.rows() || g.width != p_m.cols()) {
    throw std::invalid_argument("morph: graph and probability map shapes differ");
  }
  TubeGraph canon = g;
  canon.canonicalize();
  canon.validate();

  std::vector<float> comp(p_m.size());
  for (size_t i = 0; i < comp.size(); ++i) {
    comp[i] = 1.0f - p_m.values()[i];
  }
  const ProbMap cost =
      ProbMap::from_values(p_m.rows(), p_m.cols(), std::move(comp));

  struct EdgeOut {
    EdgeRun run;
    std::optional<PixelPath> path;
  };
  std::vector<EdgeOut> outs(canon.edges.size());
  parallel_for(canon.edges.size(), threads, [&](size_t i) {
    const auto [ia, ib] = canon.edges[i];
    const Coord s = detail::round_node(canon.nodes[ia], p_m.rows(), p_m.cols());
    const Coord e = detail::round_node(canon.nodes[ib], p_m.rows(), p_m.cols());
    PathSearchResult res = skeleton_dijkstra_ex(s, e, cost, cfg.p_thresh);
    EdgeOut& out = outs[i];
    out.run.a = ia;
    out.run.b = ib;
    out.run.threshold_rejected = res.threshold_rejected;
    if (res.path) {
      out.run.accepted = true;
      out.run.total_cost = res.path->total_cost;
      out.run.path_len = res.path->points.size();
      out.path = std::move(res.path);
    }
  });

  MorphRun result{Mask(p_m.rows(), p_m.cols()), {}};
  result.edges.reserve(outs.size());
  for (auto& out : outs) {
    if (out.path) {
      for (const auto& p : out.path->points) result.mask.set(p, true);
    }
    result.edges.push_back(out.run);
  }
  return result;
}

inline Mask morph(const TubeGraph& g, const ProbMap& p_m,
                  const MorphConfig& cfg, int threads = 1) {
  return morph_run(g, p_m, cfg, threads).mask;
}

// Window origins for tiled processing: every `stride` pixels, with the last
// window pulled back so it ends exactly at the raster border.
inline std::vector<int> window_origins(int extent, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw std::invalid_argument("window and stride must be positive");
  }
  if (window > extent) {
    throw std::invalid_argument("window larger than raster extent");
  }
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    if (o + window >= extent) {
      out.push_back(extent - window);
      break;
    }
    out.push_back(o);
  }
  return out;
}

// Morphs each window's graph on the cropped probability map and ORs the
// per-window masks into the full-size output. Windows are processed in the
// given order; the union is order-independent.
inline Mask morph_windows(const WindowedGraphs& wg, const ProbMap& p_m,
                          const MorphConfig& cfg, int threads = 1) {
  for (const auto& w : wg) {
    if (w.origin.row < 0 || w.origin.col < 0 ||
        w.origin.row + w.graph.height > p_m.rows() ||
        w.origin.col + w.graph.width > p_m.cols()) {
      throw FormatError("morph_windows: window does not fit inside the raster");
    }
    w.graph.validate();
  }
  std::vector<Mask> partial(wg.size());
  parallel_for(wg.size(), threads, [&](size_t i) {
    const auto& w = wg[i];
    std::vector<float> crop(static_cast<size_t>(w.graph.height) *
                            w.graph.width);
    for (int r = 0; r < w.graph.height; ++r) {
      for (int c = 0; c < w.graph.width; ++c) {
        crop[static_cast<size_t>(r) * w.graph.width + c] =
            p_m(w.origin.row + r, w.origin.col + c);
      }
    }
    const ProbMap local =
        ProbMap::from_values(w.graph.height, w.graph.width, std::move(crop));
    partial[i] = morph(w.graph, local, cfg, 1);
  });
  Mask out(p_m.rows(), p_m.cols());
  for (size_t i = 0; i < wg.size(); ++i) {
    const auto& w = wg[i];
    for (int r = 0; r < partial[i].rows(); ++r) {
      for (int c = 0; c < partial[i].cols(); ++c) {
        if (partial[i](r, c)) out.set(w.origin.row + r, w.origin.col + c, true);
      }
    }
  }
  return out;
}

}  // namespace tube

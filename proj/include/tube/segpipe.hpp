// Segmentation-task inference glue: derive a centerline probability map
// from a segmentation probability map (threshold, skeletonize, distance
// weighting), and suppress false positives by dilating the morphed mask
// inside the segmentation boundary until stabilisation.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tube/graph.hpp"
#include "tube/io.hpp"
#include "tube/morph.hpp"
#include "tube/raster.hpp"
#include "tube/skeleton.hpp"

namespace tube {

namespace detail {

// Felzenszwalb-Huttenlocher 1-D squared distance transform of a sampled
// function f, written into d.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  d.assign(n, 0.0);
  std::vector<int> v(n, 0);
  std::vector<double> z(n + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

// Exact Euclidean distance from every pixel to the nearest foreground
// pixel. Pixels with no foreground anywhere get +infinity.
inline Grid<double> distance_to_foreground(const Mask& fg) {
  const int rows = fg.rows();
  const int cols = fg.cols();
  const double inf = std::numeric_limits<double>::infinity();
  Grid<double> sq(rows, cols, inf);
  std::vector<double> f(std::max(rows, cols));
  std::vector<double> d;
  // columns first
  for (int c = 0; c < cols; ++c) {
    f.assign(rows, inf);
    for (int r = 0; r < rows; ++r) {
      if (fg(r, c)) f[r] = 0.0;
    }
    detail::edt_1d(f, d);
    for (int r = 0; r < rows; ++r) sq(r, c) = d[r];
  }
  // then rows
  for (int r = 0; r < rows; ++r) {
    f.assign(cols, 0.0);
    for (int c = 0; c < cols; ++c) f[c] = sq(r, c);
    detail::edt_1d(f, d);
    for (int c = 0; c < cols; ++c) sq(r, c) = d[c];
  }
  Grid<double> out(rows, cols, inf);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out(r, c) = std::isinf(sq(r, c)) ? inf : std::sqrt(sq(r, c));
    }
  }
  return out;
}

// Centerline probability from a segmentation probability map: threshold,
// skeletonize, build the normalised distance map D to the skeleton and
// return s_m * (1 - D) elementwise. An empty skeleton yields all zeros.
inline ProbMap soft_skeleton(const ProbMap& s_m, double thresh = 0.5) {
  if (!(thresh > 0.0 && thresh < 1.0)) {
    throw std::invalid_argument("soft_skeleton: thresh must lie in (0, 1)");
  }
  const Mask seg = threshold(s_m, thresh);
  const Mask skel = skeletonize(seg);
  if (count_foreground(skel) == 0) {
    return ProbMap(s_m.rows(), s_m.cols());
  }
  Grid<double> dist = distance_to_foreground(skel);
  double dmax = 0.0;
  for (int r = 0; r < dist.rows(); ++r) {
    for (int c = 0; c < dist.cols(); ++c) dmax = std::max(dmax, dist(r, c));
  }
  std::vector<float> out(s_m.size());
  for (int r = 0; r < s_m.rows(); ++r) {
    for (int c = 0; c < s_m.cols(); ++c) {
      const double dn = dmax > 0.0 ? dist(r, c) / dmax : 0.0;
      double v = s_m(r, c) * (1.0 - dn);
      v = std::clamp(v, 0.0, 1.0);
      out[static_cast<size_t>(r) * s_m.cols() + c] = static_cast<float>(v);
    }
  }
  return ProbMap::from_values(s_m.rows(), s_m.cols(), std::move(out));
}

// Geodesic reconstruction by iterated 3x3 dilation: start from m AND
// s_mask and dilate inside s_mask until the mask stops changing. The
// fixpoint is the union of the 8-connected components of s_mask that the
// seed touches.
inline Mask dilate_with_seg_limit(const Mask& m, const Mask& s_mask) {
  if (!same_shape(m, s_mask)) {
    throw std::invalid_argument("dilate_with_seg_limit: shape mismatch");
  }
  Mask cur(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (m(r, c) && s_mask(r, c)) cur.set(r, c, true);
    }
  }
  while (true) {
    Mask next = cur;
    bool changed = false;
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        if (cur(r, c) || !s_mask(r, c)) continue;
        for (const auto& d : kNeighbours8) {
          if (cur.fg(r + d.row, c + d.col)) {
            next.set(r, c, true);
            changed = true;
            break;
          }
        }
      }
    }
    if (!changed) return cur;
    cur = std::move(next);
  }
}

// Full segmentation post-processing: soft-skeletonize, morph the graph on
// the derived centerline probabilities, then keep only the segmentation
// components reached by the morphed mask.
inline Mask segment_postprocess(const ProbMap& s_m, const TubeGraph& g,
                                const MorphConfig& cfg, double thresh = 0.5,
                                int threads = 1) {
  const ProbMap p_m = soft_skeleton(s_m, thresh);
  const Mask morphed = morph(g, p_m, cfg, threads);
  return dilate_with_seg_limit(morphed, threshold(s_m, thresh));
}

inline Mask segment_postprocess(const ProbMap& s_m, const WindowedGraphs& wg,
                                const MorphConfig& cfg, double thresh = 0.5,
                                int threads = 1) {
  const ProbMap p_m = soft_skeleton(s_m, thresh);
  const Mask morphed = morph_windows(wg, p_m, cfg, threads);
  return dilate_with_seg_limit(morphed, threshold(s_m, thresh));
}

}  // namespace tube

// Zhang-Suen thinning and neighbour-count classification of centerline
// pixels. Out-of-bounds neighbours count as background throughout.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tube/raster.hpp"

namespace tube {

enum class PixelClass { isolated, endpoint, path_point, junction };

struct NeighborClass {
  int n = 0;  // foreground 8-neighbour count
  PixelClass cls = PixelClass::isolated;
};

inline int neighbor_count(const Mask& m, Coord p) {
  int n = 0;
  for (const auto& d : kNeighbours8) {
    n += m.fg(p.row + d.row, p.col + d.col) ? 1 : 0;
  }
  return n;
}

// Classifies a foreground pixel by its number of foreground 8-neighbours:
// 0 isolated, 1 endpoint, 2 path point, >= 3 junction.
inline NeighborClass classify_pixel(const Mask& m, Coord p) {
  if (!m.in_bounds(p)) {
    throw std::invalid_argument("classify_pixel: coordinate out of bounds");
  }
  if (!m.fg(p)) {
    throw std::invalid_argument("classify_pixel: pixel (" +
                                std::to_string(p.row) + ", " +
                                std::to_string(p.col) + ") is background");
  }
  const int n = neighbor_count(m, p);
  PixelClass cls;
  if (n == 0) {
    cls = PixelClass::isolated;
  } else if (n == 1) {
    cls = PixelClass::endpoint;
  } else if (n == 2) {
    cls = PixelClass::path_point;
  } else {
    cls = PixelClass::junction;
  }
  return {n, cls};
}

namespace detail {

// Zhang-Suen conditions for one pixel. Neighbours are labelled
// P2..P9 clockwise starting at north. `second_pass` selects the
// sub-iteration-specific connectivity conditions.
inline bool zhang_suen_removable(const Mask& m, int r, int c,
                                 bool second_pass) {
  const int p2 = m.fg(r - 1, c) ? 1 : 0;
  const int p3 = m.fg(r - 1, c + 1) ? 1 : 0;
  const int p4 = m.fg(r, c + 1) ? 1 : 0;
  const int p5 = m.fg(r + 1, c + 1) ? 1 : 0;
  const int p6 = m.fg(r + 1, c) ? 1 : 0;
  const int p7 = m.fg(r + 1, c - 1) ? 1 : 0;
  const int p8 = m.fg(r, c - 1) ? 1 : 0;
  const int p9 = m.fg(r - 1, c - 1) ? 1 : 0;

  const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
  if (b < 2 || b > 6) return false;

  const int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) +
                (p4 == 0 && p5 == 1) + (p5 == 0 && p6 == 1) +
                (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
  if (a != 1) return false;

  if (!second_pass) {
    return (p2 * p4 * p6) == 0 && (p4 * p6 * p8) == 0;
  }
  return (p2 * p4 * p8) == 0 && (p2 * p6 * p8) == 0;
}

// One sub-iteration; deletions are decided on the incoming state and
// applied together. Returns true when anything was removed.
inline bool zhang_suen_pass(Mask& m, bool second_pass) {
  std::vector<Coord> kill;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (m(r, c) && zhang_suen_removable(m, r, c, second_pass)) {
        kill.push_back({r, c});
      }
    }
  }
  for (const auto& p : kill) m.set(p, false);
  return !kill.empty();
}

}  // namespace detail

// Thins a binary mask to a one-pixel-wide skeleton (Zhang-Suen). The
// result is a subset of the input and stable under re-application.
inline Mask skeletonize(const Mask& mask) {
  Mask m = mask;
  bool changed = true;
  while (changed) {
    const bool a = detail::zhang_suen_pass(m, false);
    const bool b = detail::zhang_suen_pass(m, true);
    changed = a || b;
  }
  return m;
}

}  // namespace tube

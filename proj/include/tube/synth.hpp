// Deterministic synthetic tubular structures: branching tree masks with a
// known-good centerline, and a degrader that turns a centerline mask into
// an imperfect probability map (dropouts, blur, background clutter).
//
// All randomness comes from SplitMix64 so outputs are reproducible
// bit-for-bit from the seed alone, on any platform.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tube/raster.hpp"
#include "tube/skeleton.hpp"

namespace tube {

// SplitMix64: state advances by 0x9E3779B97F4A7C15; output mixing uses the
// constants 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB with shifts 30/27/31.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

struct NoiseSpec {
  double drop_prob = 0.0;
  int blur_radius = 0;
  double clutter_prob = 0.0;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  int size = 64;
  int n_branches = 4;
  double wobble = 0.15;
  NoiseSpec noise;
};

struct TreeSample {
  Mask mask;        // dilated tube mask
  Mask centerline;  // skeletonize(mask)
};

namespace detail {

struct StrokePoint {
  Coord pix;
  double dir;
};

inline int chebyshev(Coord a, Coord b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

// Random-walk stroke drawing with a clearance rule: a stroke stops before
// coming within `clearance` (Chebyshev) of existing foreground, ignoring
// its own recent trail and the spawn anchor region, so distinct branches
// never merge and the tree stays acyclic after dilation.
struct TreeBuilder {
  int size;
  int width;
  int margin;
  int clearance;
  Mask draft;
  SplitMix64& rng;

  TreeBuilder(int size_, int width_, SplitMix64& rng_)
      : size(size_),
        width(width_),
        margin(width_ + 2),
        clearance(width_ + 1),
        draft(size_, size_),
        rng(rng_) {}

  bool blocked(Coord pix, Coord anchor,
               const std::vector<Coord>& own_recent) const {
    for (int dr = -clearance; dr <= clearance; ++dr) {
      for (int dc = -clearance; dc <= clearance; ++dc) {
        const Coord q{pix.row + dr, pix.col + dc};
        if (!draft.fg(q)) continue;
        if (chebyshev(q, anchor) <= clearance + 1) continue;
        if (std::find(own_recent.begin(), own_recent.end(), q) !=
            own_recent.end()) {
          continue;
        }
        return true;
      }
    }
    return false;
  }

  struct Stroke {
    std::vector<StrokePoint> poly;
    std::vector<Coord> added;  // pixels this stroke newly set, for rollback
  };

  Stroke draw(double row, double col, double dir, Coord anchor,
              double wobble) {
    Stroke s;
    std::vector<Coord> own_recent;
    const size_t recent_window = 3 * (clearance + 1);
    const int len_target =
        size / 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 3) + 1));
    for (int step = 0; step <= len_target; ++step) {
      const Coord pix{static_cast<int>(std::floor(row + 0.5)),
                      static_cast<int>(std::floor(col + 0.5))};
      if (pix.row < margin || pix.row >= size - margin || pix.col < margin ||
          pix.col >= size - margin) {
        break;
      }
      if (blocked(pix, anchor, own_recent)) break;
      if (!draft(pix.row, pix.col)) {
        draft.set(pix, true);
        s.added.push_back(pix);
      }
      s.poly.push_back({pix, dir});
      own_recent.push_back(pix);
      if (own_recent.size() > recent_window) {
        own_recent.erase(own_recent.begin());
      }
      dir += wobble * (rng.uniform() * 2.0 - 1.0);
      row += std::sin(dir);
      col += std::cos(dir);
    }
    return s;
  }

  void rollback(const Stroke& s) {
    for (const auto& p : s.added) draft.set(p, false);
  }
};

}  // namespace detail

// Grows a branching tree of strokes, dilates it to a 2-4 pixel wide tube
// mask and derives the matching centerline. Deterministic per spec.
inline TreeSample gen_tree_mask(const SynthSpec& spec) {
  if (spec.size < 32) {
    throw std::invalid_argument("gen_tree_mask: size must be >= 32");
  }
  if (spec.n_branches < 1) {
    throw std::invalid_argument("gen_tree_mask: n_branches must be >= 1");
  }
  SplitMix64 rng(spec.seed);
  const int width = 2 + static_cast<int>(rng.below(3));  // 2..4
  detail::TreeBuilder builder(spec.size, width, rng);
  const int inner = spec.size - 2 * builder.margin;

  std::vector<std::vector<detail::StrokePoint>> strokes;
  constexpr double kTau = 2.0 * std::numbers::pi;
  for (int attempt = 0; attempt < 20 && strokes.empty(); ++attempt) {
    const double r = builder.margin + static_cast<double>(rng.below(inner));
    const double c = builder.margin + static_cast<double>(rng.below(inner));
    const double dir = rng.uniform() * kTau;
    auto stroke = builder.draw(r, c, dir,
                               {static_cast<int>(std::floor(r + 0.5)),
                                static_cast<int>(std::floor(c + 0.5))},
                               spec.wobble);
    if (static_cast<int>(stroke.poly.size()) >= spec.size / 3) {
      strokes.push_back(std::move(stroke.poly));
    } else {
      builder.rollback(stroke);
    }
  }
  for (int b = 1; b < spec.n_branches && !strokes.empty(); ++b) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      const auto& parent = strokes[rng.below(strokes.size())];
      const auto& at = parent[rng.below(parent.size())];
      const double side = rng.below(2) ? 1.0 : -1.0;
      const double off = std::numbers::pi / 5.0 +
                         rng.uniform() * (std::numbers::pi / 2.0 -
                                          std::numbers::pi / 5.0);
      auto stroke = builder.draw(at.pix.row, at.pix.col, at.dir + side * off,
                                 at.pix, spec.wobble);
      if (static_cast<int>(stroke.poly.size()) >= 4) {
        strokes.push_back(std::move(stroke.poly));
        break;
      }
      builder.rollback(stroke);
    }
  }

  // Dilate the strokes to the tube width.
  TreeSample out{Mask(spec.size, spec.size), Mask(spec.size, spec.size)};
  const int lo = -(width / 2);
  const int hi = lo + width - 1;
  for (int r = 0; r < spec.size; ++r) {
    for (int c = 0; c < spec.size; ++c) {
      if (!builder.draft(r, c)) continue;
      for (int dr = lo; dr <= hi; ++dr) {
        for (int dc = lo; dc <= hi; ++dc) {
          out.mask.set(r + dr, c + dc, true);
        }
      }
    }
  }
  out.centerline = skeletonize(out.mask);
  return out;
}

// Models an imperfect probability map from a binary raster: foreground
// starts at 1 and is independently knocked down to 0.2, the map is box
// blurred, then background clutter blobs appear at 0.6. Draws happen in
// row-major order; foreground pixels consume one draw for the dropout and
// background pixels one draw for clutter seeding.
inline ProbMap degrade(const Mask& p, const NoiseSpec& noise,
                       std::uint64_t seed) {
  if (noise.drop_prob < 0.0 || noise.drop_prob > 1.0 ||
      noise.clutter_prob < 0.0 || noise.clutter_prob > 1.0 ||
      noise.blur_radius < 0) {
    throw std::invalid_argument("degrade: noise parameters out of range");
  }
  SplitMix64 rng(seed);
  const int rows = p.rows();
  const int cols = p.cols();
  Grid<double> map(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!p(r, c)) continue;
      map(r, c) = rng.uniform() < noise.drop_prob ? 0.2 : 1.0;
    }
  }
  if (noise.blur_radius > 0) {
    const int rad = noise.blur_radius;
    const double area = static_cast<double>(2 * rad + 1) * (2 * rad + 1);
    Grid<double> blurred(rows, cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int dr = -rad; dr <= rad; ++dr) {
          for (int dc = -rad; dc <= rad; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) {
              acc += map(rr, cc);
            }
          }
        }
        blurred(r, c) = acc / area;  // outside pixels count as zero
      }
    }
    map = std::move(blurred);
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (p(r, c)) continue;
      if (rng.uniform() < noise.clutter_prob) {
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr >= 0 && rr < rows && cc >= 0 && cc < cols && !p(rr, cc)) {
              map(rr, cc) = std::max(map(rr, cc), 0.6);
            }
          }
        }
      }
    }
  }
  std::vector<float> out(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<size_t>(r) * cols + c] =
          static_cast<float>(std::clamp(map(r, c), 0.0, 1.0));
    }
  }
  return ProbMap::from_values(rows, cols, std::move(out));
}

}  // namespace tube

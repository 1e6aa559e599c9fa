#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "tube/graph_build.hpp"
#include "tube/metrics.hpp"
#include "tube/segpipe.hpp"
#include "tube/synth.hpp"

namespace {

bool subset_of(const tube::Mask& a, const tube::Mask& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a.values()[i] && !b.values()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("distance transform is exact against brute force") {
  tube::SplitMix64 rng(51);
  for (int i = 0; i < 25; ++i) {
    const tube::Mask m = oracle::random_mask(rng, 3 + i, 17 - (i % 7), 0.15);
    if (tube::count_foreground(m) == 0) continue;
    const auto fast = tube::distance_to_foreground(m);
    const auto slow = oracle::edt_bruteforce(m);
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        REQUIRE(fast(r, c) == Catch::Approx(slow(r, c)).margin(1e-9));
      }
    }
  }
}

TEST_CASE("distance transform hand case on a 3x3 image") {
  const tube::Mask m = oracle::mask_from_rows({"#..", "...", "..."});
  const auto d = tube::distance_to_foreground(m);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == 1.0);
  CHECK(d(1, 1) == Catch::Approx(std::sqrt(2.0)));
  CHECK(d(2, 2) == Catch::Approx(std::sqrt(8.0)));
}

TEST_CASE("soft_skeleton of an all-zero map is all zero") {
  const tube::ProbMap z(16, 16);
  const tube::ProbMap out = tube::soft_skeleton(z, 0.5);
  for (float v : out.values()) CHECK(v == 0.0f);
}

TEST_CASE("soft_skeleton of a crisp line is the line itself") {
  tube::Mask line(9, 9);
  for (int c = 1; c <= 7; ++c) line.set(4, c, true);
  const tube::ProbMap out = tube::soft_skeleton(tube::indicator(line), 0.5);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      CHECK(out(r, c) == (line(r, c) ? 1.0f : 0.0f));
    }
  }
}

TEST_CASE("soft_skeleton matches a reference pipeline on a filled disk") {
  const int n = 17;
  tube::Mask disk(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if ((r - 8) * (r - 8) + (c - 8) * (c - 8) <= 25) disk.set(r, c, true);
    }
  }
  std::vector<float> v(static_cast<size_t>(n) * n, 0.0f);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (disk(r, c)) v[static_cast<size_t>(r) * n + c] = 0.9f;
    }
  }
  const tube::ProbMap s_m = tube::ProbMap::from_values(n, n, std::move(v));
  const tube::ProbMap got = tube::soft_skeleton(s_m, 0.5);

  // reference: same formula, brute-force distances
  const tube::Mask skel = tube::skeletonize(disk);
  REQUIRE(tube::count_foreground(skel) > 0);
  const auto dist = oracle::edt_bruteforce(skel);
  double dmax = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) dmax = std::max(dmax, dist(r, c));
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double want = s_m(r, c) * (1.0 - dist(r, c) / dmax);
      REQUIRE(got(r, c) == Catch::Approx(want).margin(1e-6));
    }
  }
  CHECK(got(0, 0) == 0.0f);  // far background has segmentation probability 0
}

TEST_CASE("soft_skeleton never exceeds the segmentation probabilities") {
  tube::SplitMix64 rng(52);
  for (int i = 0; i < 10; ++i) {
    const tube::ProbMap s_m = oracle::random_prob(rng, 24, 24);
    const tube::ProbMap p_m = tube::soft_skeleton(s_m, 0.5);
    for (size_t k = 0; k < s_m.size(); ++k) {
      CHECK(p_m.values()[k] <= s_m.values()[k] + 1e-6f);
    }
  }
}

TEST_CASE("soft_skeleton validates its threshold") {
  const tube::ProbMap z(4, 4);
  CHECK_THROWS_AS(tube::soft_skeleton(z, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(tube::soft_skeleton(z, 1.0), std::invalid_argument);
}

TEST_CASE("dilate_with_seg_limit basic laws") {
  const tube::Mask empty(6, 6);
  const tube::Mask s = oracle::mask_from_rows({
      "##....",
      "##....",
      "......",
      "...###",
      "...###",
      "......",
  });
  CHECK(tube::count_foreground(tube::dilate_with_seg_limit(empty, s)) == 0);

  // seed covering everything saturates to the limit
  tube::Mask full(6, 6);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) full.set(r, c, true);
  }
  CHECK(tube::dilate_with_seg_limit(full, s) == s);

  // seed touching only the first component selects exactly it
  tube::Mask seed(6, 6);
  seed.set(0, 0, true);
  const tube::Mask got = tube::dilate_with_seg_limit(seed, s);
  const tube::Mask first = oracle::mask_from_rows({
      "##....",
      "##....",
      "......",
      "......",
      "......",
      "......",
  });
  CHECK(got == first);
}

TEST_CASE("dilate_with_seg_limit rejects shape mismatches") {
  CHECK_THROWS_AS(tube::dilate_with_seg_limit(tube::Mask(3, 3), tube::Mask(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("dilate_with_seg_limit equals component selection and is idempotent") {
  tube::SplitMix64 rng(53);
  for (int i = 0; i < 100; ++i) {
    const tube::Mask seed = oracle::random_mask(rng, 14, 14, 0.12);
    const tube::Mask limit = oracle::random_mask(rng, 14, 14, 0.45);
    const tube::Mask got = tube::dilate_with_seg_limit(seed, limit);
    CHECK(got == oracle::component_selection(seed, limit));
    CHECK(tube::dilate_with_seg_limit(got, limit) == got);
  }
}

TEST_CASE("dilate_with_seg_limit is monotone in the seed") {
  tube::SplitMix64 rng(54);
  for (int i = 0; i < 25; ++i) {
    const tube::Mask m2 = oracle::random_mask(rng, 12, 12, 0.2);
    tube::Mask m1 = m2;
    // knock out a few pixels to get a subset
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) {
        if (m1(r, c) && rng.uniform() < 0.5) m1.set(r, c, false);
      }
    }
    const tube::Mask limit = oracle::random_mask(rng, 12, 12, 0.5);
    CHECK(subset_of(tube::dilate_with_seg_limit(m1, limit),
                    tube::dilate_with_seg_limit(m2, limit)));
  }
}

TEST_CASE("segment_postprocess with an empty morph mask is empty") {
  const tube::ProbMap s_m(32, 32);
  tube::TubeGraph g;
  g.height = 32;
  g.width = 32;
  const tube::Mask out = tube::segment_postprocess(s_m, g, {0.5});
  CHECK(tube::count_foreground(out) == 0);
}

TEST_CASE("segment_postprocess reproduces ground truth on perfect inputs") {
  int checked = 0;
  for (std::uint64_t seed = 600; seed < 620; ++seed) {
    tube::SynthSpec spec;
    spec.seed = seed;
    spec.size = 64;
    spec.n_branches = 4;
    const tube::TreeSample t = tube::gen_tree_mask(spec);
    if (tube::count_foreground(t.mask) == 0) continue;
    const tube::TubeGraph g = tube::build_graph(t.centerline).graph;
    const tube::Mask out =
        tube::segment_postprocess(tube::indicator(t.mask), g, {0.5});
    CHECK(out == t.mask);
    ++checked;
  }
  REQUIRE(checked > 0);
}

TEST_CASE("segment_postprocess drops isolated spurious blobs") {
  tube::SynthSpec spec;
  spec.seed = 9;
  spec.size = 64;
  spec.n_branches = 3;
  const tube::TreeSample t = tube::gen_tree_mask(spec);
  REQUIRE(tube::count_foreground(t.mask) > 0);
  // add a far-away blob to the segmentation input
  tube::Mask dirty = t.mask;
  bool placed = false;
  for (int r = 0; r < 60 && !placed; ++r) {
    for (int c = 0; c < 60 && !placed; ++c) {
      bool clear = true;
      for (int dr = -2; dr <= 3 && clear; ++dr) {
        for (int dc = -2; dc <= 3 && clear; ++dc) {
          if (dirty.fg(r + dr, c + dc)) clear = false;
        }
      }
      if (clear) {
        dirty.set(r, c, true);
        dirty.set(r + 1, c, true);
        dirty.set(r, c + 1, true);
        placed = true;
      }
    }
  }
  REQUIRE(placed);
  const tube::TubeGraph g = tube::build_graph(t.centerline).graph;
  const tube::Mask out =
      tube::segment_postprocess(tube::indicator(dirty), g, {0.5});
  CHECK(out == t.mask);
}

// Builds per-window graphs for tiled inference by cropping a centerline
// mask window by window and running graph construction on each crop.
// Branches that cross a window border end at endpoints inside the crop, so
// every window sees a self-contained local graph.
#pragma once

#include "tube/graph_build.hpp"
#include "tube/io.hpp"
#include "tube/morph.hpp"
#include "tube/raster.hpp"

namespace tube {

inline WindowedGraphs windowed_graphs_from_mask(const Mask& centerline,
                                                int window, int stride) {
  const auto row_origins = window_origins(centerline.rows(), window, stride);
  const auto col_origins = window_origins(centerline.cols(), window, stride);
  WindowedGraphs out;
  for (const int r0 : row_origins) {
    for (const int c0 : col_origins) {
      Mask crop(window, window);
      bool any = false;
      for (int r = 0; r < window; ++r) {
        for (int c = 0; c < window; ++c) {
          if (centerline(r0 + r, c0 + c)) {
            crop.set(r, c, true);
            any = true;
          }
        }
      }
      if (!any) continue;  // nothing to morph in this window
      out.push_back({Coord{r0, c0}, build_graph(crop).graph});
    }
  }
  return out;
}

}  // namespace tube

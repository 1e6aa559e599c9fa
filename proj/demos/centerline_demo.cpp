// End-to-end library walkthrough: generate a synthetic tree, degrade its
// centerline into a noisy probability map, rebuild the centerline by
// morphing the ground-truth graph, and compare against plain thresholding.
#include <cstdint>
#include <iostream>

#include "tube/graph_build.hpp"
#include "tube/metrics.hpp"
#include "tube/morph.hpp"
#include "tube/synth.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;

  tube::SynthSpec spec;
  spec.seed = seed;
  spec.size = 64;
  spec.n_branches = 5;
  spec.noise = {0.15, 0, 0.02};
  const tube::TreeSample sample = tube::gen_tree_mask(spec);
  const tube::ProbMap prob = tube::degrade(sample.centerline, spec.noise, seed);

  const tube::TubeGraph graph = tube::build_graph(sample.centerline).graph;
  const tube::Mask morphed = tube::morph(graph, prob, {0.5});
  const tube::Mask thresholded = tube::threshold(prob, 0.5);

  const auto topo_morph = tube::topo_errors(morphed, sample.centerline);
  const auto topo_thresh = tube::topo_errors(thresholded, sample.centerline);

  std::cout << "seed " << seed << ": " << graph.nodes.size() << " nodes, "
            << graph.edges.size() << " edges\n"
            << "beta0 error  morph: " << topo_morph.beta0_err
            << "  threshold: " << topo_thresh.beta0_err << "\n"
            << "beta1 error  morph: " << topo_morph.beta1_err
            << "  threshold: " << topo_thresh.beta1_err << "\n";
  return 0;
}

// Acceptance suite: one self-contained check per release criterion, one
// PASS/FAIL line each, non-zero exit on any failure. Thresholds are fixed
// here, not tuned at run time.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tube/decoder.hpp"
#include "tube/graph_build.hpp"
#include "tube/metrics.hpp"
#include "tube/morph.hpp"
#include "tube/raster.hpp"
#include "tube/segpipe.hpp"
#include "tube/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::ostream&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// 1. Path search against the exhaustive oracle on 5x5 grids.
bool criterion_skeleton_dijkstra(std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  tube::SplitMix64 rng(1001);
  int solvable = 0, matched = 0, pruned = 0, invalid = 0, unattributed = 0;
  for (int i = 0; i < 200; ++i) {
    const tube::ProbMap cost = oracle::random_prob(rng, 5, 5);
    const tube::Coord s{static_cast<int>(rng.below(5)),
                        static_cast<int>(rng.below(5))};
    const tube::Coord e{static_cast<int>(rng.below(5)),
                        static_cast<int>(rng.below(5))};
    const auto got = tube::skeleton_dijkstra(s, e, cost, 1.0);
    if (got && !tube::is_valid_pixel_path(*got, &cost)) {
      ++invalid;
      continue;
    }
    const auto want =
        oracle::exhaustive_min_path(s, e, cost, got ? got->total_cost : 1e300);
    if (!want) {
      if (got) ++invalid;  // search found a path the oracle says cannot exist
      continue;
    }
    ++solvable;
    if (got && got->total_cost == *want) {
      ++matched;
    } else {
      const auto no_vis = oracle::best_first_no_visited(s, e, cost);
      if (no_vis && *no_vis == *want) {
        ++pruned;
        log << "    pruning miss at case " << i << ": impl "
            << (got ? std::to_string(got->total_cost) : "none") << ", oracle "
            << *want << "\n";
      } else {
        ++unattributed;
      }
    }
  }
  const double dt = seconds_since(t0);
  log << "    solvable " << solvable << ", matched " << matched << ", pruned "
      << pruned << ", unattributed " << unattributed << ", invalid paths "
      << invalid << ", " << dt << " s\n";
  return invalid == 0 && unattributed == 0 &&
         matched >= static_cast<int>(std::ceil(0.95 * solvable)) && dt < 10.0;
}

// 2. Graph -> morph round trip preserves topology on 50 synthetic trees.
bool criterion_round_trip(std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  int instances = 0, topo_ok = 0;
  double cl_sum = 0.0;
  for (std::uint64_t seed = 0; instances < 50; ++seed) {
    tube::SynthSpec spec;
    spec.seed = seed;
    spec.size = 64;
    spec.n_branches = 5;
    const tube::TreeSample t = tube::gen_tree_mask(spec);
    if (tube::count_foreground(t.centerline) == 0) continue;
    ++instances;
    const tube::TubeGraph g = tube::build_graph(t.centerline).graph;
    const tube::Mask out = tube::morph(g, tube::indicator(t.centerline), {0.5});
    const auto err = tube::topo_errors(out, t.centerline, 64);
    if (err.beta0_err == 0.0 && err.beta1_err == 0.0) {
      ++topo_ok;
    } else {
      log << "    seed " << seed << ": beta0_err " << err.beta0_err
          << " beta1_err " << err.beta1_err << "\n";
    }
    cl_sum += tube::cl_dice(out, t.centerline);
  }
  const double dt = seconds_since(t0);
  const double cl_mean = cl_sum / instances;
  log << "    " << topo_ok << "/" << instances
      << " instances with zero topological error, mean clDice " << cl_mean
      << ", " << dt << " s\n";
  return topo_ok == instances && cl_mean >= 0.99 && dt < 30.0;
}

// 3. Morph beats thresholding on degraded maps by at least 2x in beta0.
bool criterion_morph_vs_threshold(std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  double err_morph = 0.0, err_thresh = 0.0;
  int instances = 0;
  for (std::uint64_t seed = 500; instances < 50; ++seed) {
    tube::SynthSpec spec;
    spec.seed = seed;
    spec.size = 64;
    spec.n_branches = 5;
    spec.noise = {0.15, 0, 0.02};
    const tube::TreeSample t = tube::gen_tree_mask(spec);
    if (tube::count_foreground(t.centerline) == 0) continue;
    ++instances;
    const tube::ProbMap prob = tube::degrade(t.centerline, spec.noise, seed);
    const tube::TubeGraph g = tube::build_graph(t.centerline).graph;
    const tube::Mask morphed = tube::morph(g, prob, {0.5});
    const tube::Mask thresholded = tube::threshold(prob, 0.5);
    err_morph += tube::topo_errors(morphed, t.centerline, 64).beta0_err;
    err_thresh += tube::topo_errors(thresholded, t.centerline, 64).beta0_err;
  }
  const double dt = seconds_since(t0);
  log << "    mean beta0 error: morph " << err_morph / instances
      << ", threshold " << err_thresh / instances << ", " << dt << " s\n";
  return err_morph <= 0.5 * err_thresh && dt < 60.0;
}

// 4. Accepted-edge sets nest across p_thresh and nothing is filtered at 1.0.
bool criterion_p_thresh(std::ostream& log) {
  int graphs = 0;
  for (std::uint64_t seed = 900; graphs < 10; ++seed) {
    tube::SynthSpec spec;
    spec.seed = seed;
    spec.size = 64;
    spec.n_branches = 6;
    const tube::TreeSample t = tube::gen_tree_mask(spec);
    if (tube::count_foreground(t.centerline) == 0) continue;
    ++graphs;
    const tube::ProbMap prob = tube::degrade(t.centerline, {0.35, 0, 0.01}, seed);
    const tube::TubeGraph g = tube::build_graph(t.centerline).graph;
    std::set<std::pair<int, int>> prev;
    bool first = true;
    for (const double pt : {0.25, 0.5, 0.75, 1.0}) {
      const tube::MorphRun run = tube::morph_run(g, prob, {pt});
      std::set<std::pair<int, int>> cur;
      for (const auto& e : run.edges) {
        if (e.accepted) cur.insert({e.a, e.b});
        if (pt == 1.0 && e.threshold_rejected) {
          log << "    edge filtered at p_thresh 1.0\n";
          return false;
        }
      }
      if (!first) {
        for (const auto& e : prev) {
          if (cur.count(e) == 0) {
            log << "    accepted set not nested at p_thresh " << pt << "\n";
            return false;
          }
        }
      }
      prev = std::move(cur);
      first = false;
    }
  }
  log << "    nested accepted sets across {0.25, 0.5, 0.75, 1.0} on "
      << graphs << " graphs\n";
  return true;
}

// 5. Assignment solver equals factorial enumeration.
bool criterion_hungarian(std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  tube::SplitMix64 rng(1005);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = 2 + static_cast<int>(rng.below(7));
    tube::Mat cost(n, n);
    for (auto& v : cost.v) v = rng.uniform();
    const auto got = tube::hungarian(cost);
    std::vector<std::vector<double>> nested(n, std::vector<double>(n));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) nested[r][c] = cost(r, c);
    }
    const auto [want_perm, want_cost] = oracle::brute_force_assignment(nested);
    if (tube::assignment_cost(cost, got) != want_cost ||
        got.sigma != want_perm) {
      log << "    mismatch at iteration " << iter << "\n";
      return false;
    }
  }
  const double dt = seconds_since(t0);
  log << "    200 matrices, K in {2..8}, exact, " << dt << " s\n";
  return dt < 5.0;
}

// 6. Metric implementations equal their independent oracles.
bool criterion_metric_oracles(std::ostream& log) {
  tube::SplitMix64 rng(1006);
  for (int i = 0; i < 100; ++i) {
    const tube::Mask m = oracle::random_mask(rng, 32, 32, 0.35);
    const auto sig = tube::betti(m);
    if (sig.beta0 != oracle::component_count(m)) {
      log << "    beta0 mismatch\n";
      return false;
    }
    if (sig.chi != oracle::euler_vef(m)) {
      log << "    chi mismatch\n";
      return false;
    }
  }
  for (int i = 0; i < 50; ++i) {
    const tube::Mask a = oracle::random_mask(rng, 16, 16, 0.3);
    const tube::Mask b = oracle::random_mask(rng, 16, 16, 0.3);
    if (std::abs(tube::ari(a, b) - oracle::ari_pair_counting(a, b)) > 1e-10) {
      log << "    ARI mismatch\n";
      return false;
    }
    if (std::abs(tube::voi(a, b) - oracle::voi_mutual_information(a, b)) >
        1e-10) {
      log << "    VOI mismatch\n";
      return false;
    }
  }
  const tube::Mask pred =
      oracle::mask_from_rows({"##..", "##..", "....", "...."});
  const tube::Mask gt = oracle::mask_from_rows({".##.", ".##.", "....", "...."});
  if (tube::dice(pred, gt) != 0.5 || tube::acc(pred, gt) != 12.0 / 16.0) {
    log << "    dice/acc hand case failed\n";
    return false;
  }
  log << "    betti, ARI, VOI, dice and acc all match their oracles\n";
  return true;
}

// 7. Constrained dilation equals component selection and is idempotent.
bool criterion_postprocess_law(std::ostream& log) {
  tube::SplitMix64 rng(1007);
  for (int i = 0; i < 100; ++i) {
    const tube::Mask seed = oracle::random_mask(rng, 16, 16, 0.12);
    const tube::Mask limit = oracle::random_mask(rng, 16, 16, 0.45);
    const tube::Mask got = tube::dilate_with_seg_limit(seed, limit);
    if (!(got == oracle::component_selection(seed, limit))) {
      log << "    component-selection law violated\n";
      return false;
    }
    if (!(tube::dilate_with_seg_limit(got, limit) == got)) {
      log << "    not idempotent\n";
      return false;
    }
  }
  log << "    fixpoint equals component selection on 100 pairs\n";
  return true;
}

// 8. Decoder math spot values and the linear MLP-stage scaling.
bool criterion_decoder_math(std::ostream& log) {
  bool ok = true;
  ok &= std::abs(tube::focal(0.5, 1, 0.6, 2.0) - 0.103972) < 1e-6;
  ok &= std::abs(tube::focal(0.5, 0, 0.6, 2.0) - 0.069315) < 1e-6;
  if (!ok) {
    log << "    focal spot values off\n";
    return false;
  }
  tube::Mat a_gt(2, 2, 0.0);
  a_gt(0, 1) = 1.0;
  a_gt(1, 0) = 1.0;
  const tube::Mat half(2, 2, 0.5);
  if (std::abs(tube::adjacency_loss(a_gt, half) - 0.5 * std::log(2.0)) >
      1e-9) {
    log << "    adjacency spot value off\n";
    return false;
  }
  tube::QueryFeatures q;
  q.q_tilde = tube::Mat(2, 2, 0.0);
  q.q_tilde(0, 0) = 1.0;
  q.q_tilde(1, 1) = 1.0;
  q.condition_mlp = tube::Mlp::identity(2, 3);
  q.value_mlp = tube::Mlp::identity(2, 2);
  const tube::Mat gram = tube::link_forward(q);
  if (std::abs(gram(0, 0) - 0.7310585786300049) > 1e-9 ||
      std::abs(gram(0, 1) - 0.5) > 1e-9) {
    log << "    identity-MLP Gram case off\n";
    return false;
  }
  auto mlp_macs = [](int p) {
    const int c = 8;
    tube::QueryFeatures qf;
    qf.q_tilde = tube::Mat(p, c, 0.25);
    qf.condition_mlp = tube::Mlp::identity(c, c + 1);
    qf.value_mlp = tube::Mlp::identity(c, c);
    tube::LinkOpCounts k;
    tube::link_forward(qf, &k);
    return k.mlp_macs;
  };
  const double ratio =
      static_cast<double>(mlp_macs(16)) / static_cast<double>(mlp_macs(8));
  log << "    MLP-stage op ratio P=16 vs P=8: " << ratio << "\n";
  return ratio >= 1.8 && ratio <= 2.2;
}

// 9. Whole-pipeline determinism through the CLI at 1 and 8 threads.
bool criterion_determinism(std::ostream& log) {
  const fs::path dir =
      fs::temp_directory_path() /
      ("tube_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto file = [&](const std::string& n) { return (dir / n).string(); };
  auto run = [&](const std::string& args) {
    const std::string cmd =
        std::string(TUBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status >= 0 && WEXITSTATUS(status) == 0;
  };
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  bool ok = true;
  std::vector<std::string> outputs;
  for (const int threads : {1, 8}) {
    for (const int rep : {0, 1}) {
      const std::string tag =
          "t" + std::to_string(threads) + "r" + std::to_string(rep);
      ok &= run("synth --seed 77 --size 64 --branches 5 --drop-prob 0.15 "
                "--clutter-prob 0.02 --out-prob " + file("p_" + tag + ".gmf") +
                " --out-graph " + file("g_" + tag + ".json") +
                " --out-centerline " + file("c_" + tag + ".pgm") +
                " --out-mask " + file("m_" + tag + ".pgm"));
      ok &= run("pipeline --task centerline --prob " + file("p_" + tag + ".gmf") +
                " --graph " + file("g_" + tag + ".json") + " --threads " +
                std::to_string(threads) + " --out " + file("cl_" + tag + ".pgm"));
      ok &= run("eval --pred " + file("cl_" + tag + ".pgm") + " --gt " +
                file("c_" + tag + ".pgm") + " --task centerline --out " +
                file("rep_" + tag + ".json"));
      // segmentation leg of the pipeline as well
      ok &= run("pipeline --task segmentation --prob " +
                file("p_" + tag + ".gmf") + " --graph " +
                file("g_" + tag + ".json") + " --threads " +
                std::to_string(threads) + " --out " + file("sg_" + tag + ".pgm"));
      if (!ok) {
        log << "    CLI invocation failed\n";
        fs::remove_all(dir);
        return false;
      }
      outputs.push_back(slurp(file("p_" + tag + ".gmf")) +
                        slurp(file("g_" + tag + ".json")) +
                        slurp(file("cl_" + tag + ".pgm")) +
                        slurp(file("rep_" + tag + ".json")) +
                        slurp(file("sg_" + tag + ".pgm")));
    }
  }
  fs::remove_all(dir);
  for (size_t i = 1; i < outputs.size(); ++i) {
    if (outputs[i] != outputs[0]) {
      log << "    outputs differ between runs/thread counts\n";
      return false;
    }
  }
  log << "    bit-identical outputs across repeats and thread counts 1/8\n";
  return true;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1. SkeletonDijkstra matches the exhaustive oracle (>=95%, pruning "
       "attributed, <10 s)",
       criterion_skeleton_dijkstra},
      {"2. Round-trip topology: 50 trees with zero beta0/beta1 error, mean "
       "clDice >= 0.99, <30 s",
       criterion_round_trip},
      {"3. Morph beta0 error <= 0.5x thresholding on degraded maps, <60 s",
       criterion_morph_vs_threshold},
      {"4. Accepted edges nest in p_thresh; none filtered at 1.0",
       criterion_p_thresh},
      {"5. Hungarian equals brute force on 200 matrices, <5 s",
       criterion_hungarian},
      {"6. Metric oracles: betti, ARI/VOI (1e-10), dice/acc hand cases",
       criterion_metric_oracles},
      {"7. Post-processing fixpoint law on 100 pairs, idempotent",
       criterion_postprocess_law},
      {"8. Decoder math spot values and O(P) MLP-stage scaling",
       criterion_decoder_math},
      {"9. Pipeline determinism across runs and thread counts",
       criterion_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    std::ostringstream log;
    bool ok = false;
    try {
      ok = c.run(log);
    } catch (const std::exception& e) {
      log << "    exception: " << e.what() << "\n";
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << "\n" << log.str();
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " criteria failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}

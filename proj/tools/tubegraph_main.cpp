// tubegraph: command-line frontend for the tube library. Subcommands cover
// skeletonization, graph construction, graph-to-centerline morphing, the
// segmentation post-processing chain, evaluation, synthetic data generation
// and the decoder-math checker. Results go to files, diagnostics to stderr;
// exit code 0 on success, 2 on input errors, 1 on internal errors.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tube/decoder.hpp"
#include "tube/graph_build.hpp"
#include "tube/io.hpp"
#include "tube/metrics.hpp"
#include "tube/morph.hpp"
#include "tube/raster.hpp"
#include "tube/segpipe.hpp"
#include "tube/skeleton.hpp"
#include "tube/synth.hpp"
#include "tube/tiling.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tube::FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw tube::FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw tube::FormatError("short write to " + path);
}

tube::Mask load_mask(const std::string& path) {
  return tube::read_binary_pgm(read_file(path));
}

tube::ProbMap load_prob(const std::string& path) {
  return tube::read_float_map(read_file(path));
}

// JSON objects of {"long-option": value} act as defaults for flags not
// given on the command line.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool,
                        std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& ex) {
      throw CLI::FileError(std::string("config is not valid JSON: ") +
                           ex.what());
    }
    if (!j.is_object()) throw CLI::FileError("config must be a JSON object");
    std::vector<CLI::ConfigItem> out;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto scalar = [](const json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
      };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
    return out;
  }
};

void add_json_config(CLI::App* cmd) {
  cmd->config_formatter(std::make_shared<JsonConfig>());
  cmd->set_config("--config", "",
                  "JSON object of long-option defaults for this subcommand");
}

tube::Mlp mlp_from_json(const json& j) {
  tube::Mlp m;
  for (const auto& wj : j.at("weights")) {
    const int rows = static_cast<int>(wj.size());
    const int cols = static_cast<int>(wj.at(0).size());
    tube::Mat w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = wj.at(r).at(c).get<double>();
    }
    m.weights.push_back(std::move(w));
  }
  for (const auto& bj : j.at("biases")) {
    m.biases.push_back(bj.get<std::vector<double>>());
  }
  if (m.weights.size() != m.biases.size() || m.weights.empty()) {
    throw tube::FormatError("decoder fixture: malformed MLP");
  }
  return m;
}

tube::Mat mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  tube::Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json mat_to_json(const tube::Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void run_decoder_check(const std::string& fixture_path,
                       const std::string& out_path) {
  json fixture;
  try {
    fixture = json::parse(read_file(fixture_path));
  } catch (const json::exception& ex) {
    throw tube::FormatError(std::string("decoder fixture: ") + ex.what());
  }
  tube::MatchConfig cfg;
  if (fixture.contains("config")) {
    const auto& c = fixture["config"];
    cfg.lambda_class = c.value("lambda_class", cfg.lambda_class);
    cfg.lambda_coord = c.value("lambda_coord", cfg.lambda_coord);
    cfg.alpha = c.value("alpha", cfg.alpha);
    cfg.gamma = c.value("gamma", cfg.gamma);
  }
  tube::GtNodes gt;
  for (const auto& n : fixture.at("gt_nodes")) {
    gt.coords.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
  }
  tube::PredNodes pred;
  pred.scores = fixture.at("pred_nodes").at("scores").get<std::vector<double>>();
  for (const auto& n : fixture.at("pred_nodes").at("coords")) {
    pred.coords.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
  }

  const tube::Mat cost = tube::match_cost(gt, pred, cfg);
  const tube::Assignment sigma = tube::hungarian(cost);

  nlohmann::ordered_json out;
  out["sigma"] = sigma.sigma;
  out["match_cost_total"] = tube::assignment_cost(cost, sigma);
  out["hungarian_loss"] =
      tube::hungarian_loss_sample({gt, pred, sigma}, cfg);
  if (fixture.contains("adjacency_gt")) {
    const auto detail = tube::adjacency_loss_detail(
        {{mat_from_json(fixture.at("adjacency_gt")),
          mat_from_json(fixture.at("adjacency_pred"))}});
    out["adjacency_loss"] = detail.value;
    if (detail.positive_dropped) {
      std::cerr << "warning: no positive adjacency entries, half-term dropped\n";
    }
    if (detail.negative_dropped) {
      std::cerr << "warning: no negative adjacency entries, half-term dropped\n";
    }
  }
  if (fixture.contains("link")) {
    const auto& l = fixture.at("link");
    tube::QueryFeatures qf;
    const auto qj = l.at("q");
    qf.q_tilde = mat_from_json(qj);
    qf.condition_mlp = mlp_from_json(l.at("condition_mlp"));
    qf.value_mlp = mlp_from_json(l.at("value_mlp"));
    tube::LinkOpCounts counts;
    out["link_output"] = mat_to_json(tube::link_forward(qf, &counts));
    out["link_mlp_macs"] = counts.mlp_macs;
    out["link_gram_macs"] = counts.gram_macs;
  }
  const std::string text = out.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

void append_csv_row(const std::string& path, const tube::MetricsReport& rep) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw tube::FormatError("cannot write " + path);
  if (fresh) {
    out << "dice,cl_dice,acc,auc,ari,voi,beta0_err,beta1_err,chi_err\n";
  }
  auto cell = [&](const std::optional<double>& v, bool last = false) {
    if (v) out << *v;
    out << (last ? '\n' : ',');
  };
  cell(rep.dice);
  cell(rep.cl_dice);
  cell(rep.acc);
  cell(rep.auc);
  cell(rep.ari);
  cell(rep.voi);
  cell(rep.beta0_err);
  cell(rep.beta1_err);
  cell(rep.chi_err, true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-aware centerline extraction toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  // skeletonize
  {
    auto* cmd = app.add_subcommand("skeletonize", "Thin a binary mask");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "input mask (PGM)")->required();
    cmd->add_option("--out", *out, "output mask (PGM)")->required();
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        write_file(*out, tube::write_binary_pgm(tube::skeletonize(load_mask(*in))));
      };
    });
  }

  // graph
  {
    auto* cmd = app.add_subcommand("graph", "Build a branch graph from a centerline mask");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto skel_first = std::make_shared<bool>(false);
    cmd->add_option("--in", *in, "input mask (PGM)")->required();
    cmd->add_option("--out", *out, "output graph (JSON)")->required();
    cmd->add_flag("--skeletonize-first", *skel_first, "thin the mask before tracing");
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        tube::Mask m = load_mask(*in);
        if (*skel_first) m = tube::skeletonize(m);
        write_file(*out, tube::write_graph_json(tube::build_graph(m).graph) + "\n");
      };
    });
  }

  // morph
  {
    auto* cmd = app.add_subcommand("morph", "Morph a graph into a centerline mask");
    auto prob = std::make_shared<std::string>();
    auto graph = std::make_shared<std::string>();
    auto windows = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto p_thresh = std::make_shared<double>(0.5);
    auto threads = std::make_shared<int>(1);
    cmd->add_option("--prob", *prob, "centerline probability map (GMF1)")->required();
    cmd->add_option("--graph", *graph, "graph (JSON)");
    cmd->add_option("--windows", *windows, "windowed graphs (JSON)");
    cmd->add_option("--p-thresh", *p_thresh, "average-cost acceptance threshold");
    cmd->add_option("--threads", *threads, "parallelism degree");
    cmd->add_option("--out", *out, "output mask (PGM)")->required();
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        if (graph->empty() == windows->empty()) {
          throw tube::FormatError("morph: give exactly one of --graph / --windows");
        }
        const tube::ProbMap p = load_prob(*prob);
        const tube::MorphConfig cfg{*p_thresh};
        tube::Mask m =
            graph->empty()
                ? tube::morph_windows(tube::read_windowed_graphs(read_file(*windows)),
                                      p, cfg, *threads)
                : tube::morph(tube::read_graph_json(read_file(*graph)), p, cfg,
                              *threads);
        write_file(*out, tube::write_binary_pgm(m));
      };
    });
  }

  // softskel
  {
    auto* cmd = app.add_subcommand("softskel", "Centerline probabilities from a segmentation map");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto thresh = std::make_shared<double>(0.5);
    cmd->add_option("--in", *in, "segmentation probability map (GMF1)")->required();
    cmd->add_option("--out", *out, "centerline probability map (GMF1)")->required();
    cmd->add_option("--thresh", *thresh, "segmentation threshold");
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        write_file(*out, tube::write_float_map(tube::soft_skeleton(load_prob(*in), *thresh)));
      };
    });
  }

  // postprocess
  {
    auto* cmd = app.add_subcommand("postprocess", "Expand a morphed mask inside the segmentation");
    auto morph_mask = std::make_shared<std::string>();
    auto seg_prob = std::make_shared<std::string>();
    auto seg_mask = std::make_shared<std::string>();
    auto thresh = std::make_shared<double>(0.5);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--morph-mask", *morph_mask, "morphed centerline mask (PGM)")->required();
    cmd->add_option("--seg-prob", *seg_prob, "segmentation probability map (GMF1)");
    cmd->add_option("--seg-mask", *seg_mask, "segmentation mask (PGM)");
    cmd->add_option("--thresh", *thresh, "threshold for --seg-prob");
    cmd->add_option("--out", *out, "output mask (PGM)")->required();
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        if (seg_prob->empty() == seg_mask->empty()) {
          throw tube::FormatError("postprocess: give exactly one of --seg-prob / --seg-mask");
        }
        const tube::Mask limit = seg_mask->empty()
                                     ? tube::threshold(load_prob(*seg_prob), *thresh)
                                     : load_mask(*seg_mask);
        write_file(*out, tube::write_binary_pgm(
                             tube::dilate_with_seg_limit(load_mask(*morph_mask), limit)));
      };
    });
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "Score a prediction against ground truth");
    auto pred = std::make_shared<std::string>();
    auto gt = std::make_shared<std::string>();
    auto prob = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto csv = std::make_shared<std::string>();
    auto tol = std::make_shared<double>(5.0);
    auto patch = std::make_shared<int>(64);
    auto task = std::make_shared<std::string>("centerline");
    cmd->add_option("--pred", *pred, "prediction mask (PGM)")->required();
    cmd->add_option("--gt", *gt, "ground truth mask (PGM)")->required();
    cmd->add_option("--prob", *prob, "probability map for AUC (GMF1)");
    cmd->add_option("--tol", *tol, "centerline tolerance in pixels");
    cmd->add_option("--patch", *patch, "tile size for topological errors");
    cmd->add_option("--task", *task, "centerline or segmentation")
        ->check(CLI::IsMember({"centerline", "segmentation"}));
    cmd->add_option("--out", *out, "report path (JSON; stdout when omitted)");
    cmd->add_option("--csv", *csv, "append a CSV row to this file");
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        const tube::Mask p = load_mask(*pred);
        const tube::Mask g = load_mask(*gt);
        std::optional<tube::ProbMap> pm;
        if (!prob->empty()) pm = load_prob(*prob);
        const tube::EvalTask t = *task == "centerline"
                                     ? tube::EvalTask::centerline
                                     : tube::EvalTask::segmentation;
        const tube::MetricsReport rep =
            tube::evaluate(p, g, t, pm ? &*pm : nullptr, *tol, *patch);
        if (rep.beta1_clamped) {
          std::cerr << "warning: beta1 clamped at zero on at least one tile\n";
        }
        const std::string text = tube::metrics_to_json(rep).dump(2) + "\n";
        if (out->empty()) {
          std::cout << text;
        } else {
          write_file(*out, text);
        }
        if (!csv->empty()) append_csv_row(*csv, rep);
      };
    });
  }

  // synth
  {
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic tubular sample");
    auto seed = std::make_shared<std::uint64_t>(0);
    auto size = std::make_shared<int>(64);
    auto branches = std::make_shared<int>(4);
    auto wobble = std::make_shared<double>(0.15);
    auto drop = std::make_shared<double>(0.0);
    auto blur = std::make_shared<int>(0);
    auto clutter = std::make_shared<double>(0.0);
    auto out_mask = std::make_shared<std::string>();
    auto out_centerline = std::make_shared<std::string>();
    auto out_prob = std::make_shared<std::string>();
    auto out_graph = std::make_shared<std::string>();
    auto out_windows = std::make_shared<std::string>();
    auto window = std::make_shared<int>(32);
    auto stride = std::make_shared<int>(30);
    cmd->add_option("--seed", *seed, "RNG seed");
    cmd->add_option("--size", *size, "raster size");
    cmd->add_option("--branches", *branches, "number of branches");
    cmd->add_option("--wobble", *wobble, "stroke curvature");
    cmd->add_option("--drop-prob", *drop, "centerline dropout probability");
    cmd->add_option("--blur-radius", *blur, "box blur radius");
    cmd->add_option("--clutter-prob", *clutter, "background clutter probability");
    cmd->add_option("--out-mask", *out_mask, "tube mask (PGM)");
    cmd->add_option("--out-centerline", *out_centerline, "centerline mask (PGM)");
    cmd->add_option("--out-prob", *out_prob, "degraded probability map (GMF1)");
    cmd->add_option("--out-graph", *out_graph, "centerline graph (JSON)");
    cmd->add_option("--out-windows", *out_windows, "windowed graphs (JSON)");
    cmd->add_option("--window", *window, "window size for --out-windows");
    cmd->add_option("--stride", *stride, "stride for --out-windows");
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        tube::SynthSpec spec;
        spec.seed = *seed;
        spec.size = *size;
        spec.n_branches = *branches;
        spec.wobble = *wobble;
        spec.noise = {*drop, *blur, *clutter};
        const tube::TreeSample sample = tube::gen_tree_mask(spec);
        if (!out_mask->empty()) {
          write_file(*out_mask, tube::write_binary_pgm(sample.mask));
        }
        if (!out_centerline->empty()) {
          write_file(*out_centerline, tube::write_binary_pgm(sample.centerline));
        }
        if (!out_prob->empty()) {
          write_file(*out_prob, tube::write_float_map(
                                    tube::degrade(sample.centerline, spec.noise, spec.seed)));
        }
        if (!out_graph->empty()) {
          write_file(*out_graph,
                     tube::write_graph_json(tube::build_graph(sample.centerline).graph) + "\n");
        }
        if (!out_windows->empty()) {
          write_file(*out_windows,
                     tube::write_windowed_graphs(tube::windowed_graphs_from_mask(
                         sample.centerline, *window, *stride)) + "\n");
        }
      };
    });
  }

  // decoder-check
  {
    auto* cmd = app.add_subcommand("decoder-check", "Run the decoder math on a JSON fixture");
    auto fixture = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--fixture", *fixture, "fixture (JSON)")->required();
    cmd->add_option("--out", *out, "result path (JSON; stdout when omitted)");
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] { run_decoder_check(*fixture, *out); };
    });
  }

  // pipeline
  {
    auto* cmd = app.add_subcommand("pipeline", "Full inference pipeline");
    auto task = std::make_shared<std::string>("centerline");
    auto prob = std::make_shared<std::string>();
    auto graph = std::make_shared<std::string>();
    auto windows = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto p_thresh = std::make_shared<double>(0.5);
    auto thresh = std::make_shared<double>(0.5);
    auto threads = std::make_shared<int>(1);
    cmd->add_option("--task", *task, "centerline or segmentation")
        ->check(CLI::IsMember({"centerline", "segmentation"}));
    cmd->add_option("--prob", *prob,
                    "probability map (GMF1): centerline map for the centerline "
                    "task, segmentation map for the segmentation task")
        ->required();
    cmd->add_option("--graph", *graph, "graph (JSON)");
    cmd->add_option("--windows", *windows, "windowed graphs (JSON)");
    cmd->add_option("--p-thresh", *p_thresh, "average-cost acceptance threshold");
    cmd->add_option("--thresh", *thresh, "segmentation threshold (segmentation task)");
    cmd->add_option("--threads", *threads, "parallelism degree");
    cmd->add_option("--out", *out, "output mask (PGM)")->required();
    add_json_config(cmd);
    cmd->callback([=, &action] {
      action = [=] {
        if (graph->empty() == windows->empty()) {
          throw tube::FormatError("pipeline: give exactly one of --graph / --windows");
        }
        const tube::ProbMap p = load_prob(*prob);
        const tube::MorphConfig cfg{*p_thresh};
        tube::Mask result(p.rows(), p.cols());
        if (*task == "centerline") {
          result = graph->empty()
                       ? tube::morph_windows(
                             tube::read_windowed_graphs(read_file(*windows)), p,
                             cfg, *threads)
                       : tube::morph(tube::read_graph_json(read_file(*graph)),
                                     p, cfg, *threads);
        } else {
          result = graph->empty()
                       ? tube::segment_postprocess(
                             p, tube::read_windowed_graphs(read_file(*windows)),
                             cfg, *thresh, *threads)
                       : tube::segment_postprocess(
                             p, tube::read_graph_json(read_file(*graph)), cfg,
                             *thresh, *threads);
        }
        write_file(*out, tube::write_binary_pgm(result));
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    action();
  } catch (const tube::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

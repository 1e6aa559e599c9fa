// Evaluation suite for centerline and segmentation predictions: volumetric
// scores (Dice, clDice, ACC, AUC), clustering agreement (ARI, VOI) over
// connected-component labelings, and patchwise topological errors from
// Betti numbers and the Euler characteristic.
//
// Connectivity conventions, fixed across the library: components (beta0,
// ARI, VOI) use 8-connectivity; the Euler characteristic uses the
// 4-connectivity cubical complex chi = V - E + F with V foreground pixels,
// E 4-adjacent foreground pairs and F fully-foreground 2x2 blocks. beta1 is
// derived as beta0 - chi and clamped at zero (flagged) on masks where the
// mixed convention would drive it negative.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "tube/raster.hpp"
#include "tube/segpipe.hpp"
#include "tube/skeleton.hpp"

namespace tube {

struct TopoSignature {
  int beta0 = 0;
  int chi = 0;
  int beta1 = 0;
  bool beta1_clamped = false;
};

struct MetricsReport {
  std::optional<double> dice;
  std::optional<double> cl_dice;
  std::optional<double> acc;
  std::optional<double> auc;
  std::optional<double> ari;
  std::optional<double> voi;
  std::optional<double> beta0_err;
  std::optional<double> beta1_err;
  std::optional<double> chi_err;
  // Not serialised: set when a tile's beta1 had to be clamped at zero.
  bool beta1_clamped = false;
};

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("dice", m.dice);
  put("cl_dice", m.cl_dice);
  put("acc", m.acc);
  put("auc", m.auc);
  put("ari", m.ari);
  put("voi", m.voi);
  put("beta0_err", m.beta0_err);
  put("beta1_err", m.beta1_err);
  put("chi_err", m.chi_err);
  return j;
}

namespace detail {

inline void require_same_shape(const Mask& a, const Mask& b) {
  if (!same_shape(a, b)) {
    throw std::invalid_argument("metrics: rasters have different shapes");
  }
}

}  // namespace detail

inline double dice(const Mask& pred, const Mask& gt) {
  detail::require_same_shape(pred, gt);
  size_t inter = 0, p = 0, g = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.values()[i] != 0;
    const bool b = gt.values()[i] != 0;
    inter += a && b;
    p += a;
    g += b;
  }
  if (p + g == 0) return 1.0;  // both empty
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

inline double acc(const Mask& pred, const Mask& gt) {
  detail::require_same_shape(pred, gt);
  size_t agree = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    agree += (pred.values()[i] != 0) == (gt.values()[i] != 0);
  }
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

// Topology-aware Dice over skeletons: harmonic mean of topology precision
// |skel(pred) & gt| / |skel(pred)| and the symmetric sensitivity. Not
// symmetric in its arguments.
inline double cl_dice(const Mask& pred, const Mask& gt) {
  detail::require_same_shape(pred, gt);
  const Mask sp = skeletonize(pred);
  const Mask sg = skeletonize(gt);
  const size_t np = count_foreground(sp);
  const size_t ng = count_foreground(sg);
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  size_t tp_prec = 0, tp_sens = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    tp_prec += sp.values()[i] && gt.values()[i];
    tp_sens += sg.values()[i] && pred.values()[i];
  }
  const double tprec = static_cast<double>(tp_prec) / static_cast<double>(np);
  const double tsens = static_cast<double>(tp_sens) / static_cast<double>(ng);
  if (tprec + tsens == 0.0) return 0.0;
  return 2.0 * tprec * tsens / (tprec + tsens);
}

// Labels foreground components; background stays 0, components are
// numbered from 1 in scan order of their smallest pixel.
inline std::pair<Grid<int>, int> label_components(const Mask& m,
                                                  bool eight_connected = true) {
  Grid<int> labels(m.rows(), m.cols(), 0);
  int count = 0;
  std::vector<Coord> stack;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c) || labels(r, c) != 0) continue;
      ++count;
      labels(r, c) = count;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        const Coord p = stack.back();
        stack.pop_back();
        auto visit = [&](Coord q) {
          if (m.fg(q) && labels(q) == 0) {
            labels(q) = count;
            stack.push_back(q);
          }
        };
        if (eight_connected) {
          for (const auto& d : kNeighbours8) visit({p.row + d.row, p.col + d.col});
        } else {
          for (const auto& d : kNeighbours4) visit({p.row + d.row, p.col + d.col});
        }
      }
    }
  }
  return {std::move(labels), count};
}

inline TopoSignature betti(const Mask& m) {
  TopoSignature sig;
  sig.beta0 = label_components(m, true).second;
  long v = 0, e = 0, f = 0;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      ++v;
      if (m.fg(r, c + 1)) ++e;
      if (m.fg(r + 1, c)) ++e;
      if (m.fg(r, c + 1) && m.fg(r + 1, c) && m.fg(r + 1, c + 1)) ++f;
    }
  }
  sig.chi = static_cast<int>(v - e + f);
  sig.beta1 = sig.beta0 - sig.chi;
  if (sig.beta1 < 0) {
    sig.beta1 = 0;
    sig.beta1_clamped = true;
  }
  return sig;
}

struct TopoErrors {
  double beta0_err = 0.0;
  double beta1_err = 0.0;
  double chi_err = 0.0;
  bool any_clamped = false;
};

// Mean absolute per-tile differences of beta0, beta1 and chi over
// non-overlapping patch x patch tiles (remainder tiles kept, smaller).
inline TopoErrors topo_errors(const Mask& pred, const Mask& gt,
                              int patch = 64) {
  detail::require_same_shape(pred, gt);
  if (patch < 1) throw std::invalid_argument("topo_errors: patch must be >= 1");
  TopoErrors out;
  size_t tiles = 0;
  for (int r0 = 0; r0 < pred.rows(); r0 += patch) {
    for (int c0 = 0; c0 < pred.cols(); c0 += patch) {
      const int h = std::min(patch, pred.rows() - r0);
      const int w = std::min(patch, pred.cols() - c0);
      Mask tp(h, w), tg(h, w);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          tp.set(r, c, pred(r0 + r, c0 + c));
          tg.set(r, c, gt(r0 + r, c0 + c));
        }
      }
      const TopoSignature a = betti(tp);
      const TopoSignature b = betti(tg);
      out.beta0_err += std::abs(a.beta0 - b.beta0);
      out.beta1_err += std::abs(a.beta1 - b.beta1);
      out.chi_err += std::abs(a.chi - b.chi);
      out.any_clamped = out.any_clamped || a.beta1_clamped || b.beta1_clamped;
      ++tiles;
    }
  }
  out.beta0_err /= static_cast<double>(tiles);
  out.beta1_err /= static_cast<double>(tiles);
  out.chi_err /= static_cast<double>(tiles);
  return out;
}

namespace detail {

// Pixel-level contingency table between the component labelings of two
// masks. Background is one extra cluster on each side.
struct Contingency {
  std::vector<std::vector<long>> n;  // [pred cluster][gt cluster]
  std::vector<long> row_sum;
  std::vector<long> col_sum;
  long total = 0;
};

inline Contingency contingency_table(const Mask& pred, const Mask& gt) {
  const auto [lp, np] = label_components(pred, true);
  const auto [lg, ng] = label_components(gt, true);
  Contingency t;
  t.n.assign(np + 1, std::vector<long>(ng + 1, 0));
  for (int r = 0; r < pred.rows(); ++r) {
    for (int c = 0; c < pred.cols(); ++c) {
      ++t.n[lp(r, c)][lg(r, c)];
    }
  }
  t.row_sum.assign(np + 1, 0);
  t.col_sum.assign(ng + 1, 0);
  for (int i = 0; i <= np; ++i) {
    for (int j = 0; j <= ng; ++j) {
      t.row_sum[i] += t.n[i][j];
      t.col_sum[j] += t.n[i][j];
    }
  }
  t.total = static_cast<long>(pred.size());
  return t;
}

inline double choose2(long n) { return 0.5 * n * (n - 1); }

}  // namespace detail

// Adjusted Rand index between the component labelings (8-connected
// components plus one background cluster per side).
inline double ari(const Mask& pred, const Mask& gt) {
  detail::require_same_shape(pred, gt);
  const auto t = detail::contingency_table(pred, gt);
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : t.n) {
    for (long nij : row) sum_ij += detail::choose2(nij);
  }
  for (long a : t.row_sum) sum_a += detail::choose2(a);
  for (long b : t.col_sum) sum_b += detail::choose2(b);
  const double pairs = detail::choose2(t.total);
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (sum_ij - expected) / (max_index - expected);
}

// Variation of information H(X|Y) + H(Y|X) over the same labelings,
// natural logarithm.
inline double voi(const Mask& pred, const Mask& gt) {
  detail::require_same_shape(pred, gt);
  const auto t = detail::contingency_table(pred, gt);
  const double n = static_cast<double>(t.total);
  auto entropy = [&](const std::vector<long>& sums) {
    double h = 0.0;
    for (long s : sums) {
      if (s > 0) {
        const double p = s / n;
        h -= p * std::log(p);
      }
    }
    return h;
  };
  double h_joint = 0.0;
  for (const auto& row : t.n) {
    for (long nij : row) {
      if (nij > 0) {
        const double p = nij / n;
        h_joint -= p * std::log(p);
      }
    }
  }
  return 2.0 * h_joint - entropy(t.row_sum) - entropy(t.col_sum);
}

struct TolerantCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  size_t tn = 0;
};

// Distance-tolerant confusion counts for centerline evaluation: a predicted
// pixel within Euclidean distance tol of the ground truth is a true
// positive; a ground-truth pixel with no prediction within tol is a false
// negative.
inline TolerantCounts tolerant_counts(const Mask& pred, const Mask& gt,
                                      double tol) {
  detail::require_same_shape(pred, gt);
  const bool any_pred = count_foreground(pred) > 0;
  const bool any_gt = count_foreground(gt) > 0;
  Grid<double> dist_gt =
      any_gt ? distance_to_foreground(gt) : Grid<double>(pred.rows(), pred.cols(),
                                                         1e300);
  Grid<double> dist_pred =
      any_pred ? distance_to_foreground(pred)
               : Grid<double>(pred.rows(), pred.cols(), 1e300);
  TolerantCounts k;
  for (int r = 0; r < pred.rows(); ++r) {
    for (int c = 0; c < pred.cols(); ++c) {
      if (pred(r, c)) {
        if (dist_gt(r, c) <= tol) {
          ++k.tp;
        } else {
          ++k.fp;
        }
      } else if (gt(r, c) && dist_pred(r, c) > tol) {
        ++k.fn;
      }
    }
  }
  // Ground-truth pixels covered within tolerance but not predicted are not
  // counted against either side; everything else is a true negative.
  k.tn = pred.size() - k.tp - k.fp - k.fn;
  return k;
}

struct TolerantScores {
  double dice = 1.0;
  double acc = 1.0;
};

inline TolerantScores tolerant_centerline_scores(const Mask& pred,
                                                 const Mask& gt,
                                                 double tol = 5.0) {
  const TolerantCounts k = tolerant_counts(pred, gt, tol);
  TolerantScores s;
  const double denom = 2.0 * k.tp + k.fp + k.fn;
  s.dice = denom == 0.0 ? 1.0 : 2.0 * k.tp / denom;
  s.acc = static_cast<double>(k.tp + k.tn) / static_cast<double>(pred.size());
  return s;
}

// Rank-statistic AUC of the probability values against tolerance-relaxed
// pixel labels (a pixel is positive when it lies within tol of the ground
// truth foreground). Ties receive average ranks. Returns nullopt when one
// class is absent.
inline std::optional<double> tolerant_auc(const ProbMap& prob, const Mask& gt,
                                          double tol = 5.0) {
  if (!same_shape(prob, gt)) {
    throw std::invalid_argument("tolerant_auc: shape mismatch");
  }
  const bool any_gt = count_foreground(gt) > 0;
  Grid<double> dist = any_gt ? distance_to_foreground(gt)
                             : Grid<double>(gt.rows(), gt.cols(), 1e300);
  std::vector<std::pair<float, std::uint8_t>> samples;
  samples.reserve(prob.size());
  size_t pos = 0;
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      const bool positive = dist(r, c) <= tol;
      pos += positive;
      samples.emplace_back(prob(r, c), positive ? 1 : 0);
    }
  }
  const size_t neg = samples.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < samples.size()) {
    size_t j = i;
    while (j < samples.size() && samples[j].first == samples[i].first) ++j;
    const double avg_rank = 0.5 * (i + 1 + j);  // ranks are 1-based
    for (size_t k2 = i; k2 < j; ++k2) {
      if (samples[k2].second) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * pos * (pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

enum class EvalTask { centerline, segmentation };

// Full report for one (prediction, ground truth) pair. Centerline task uses
// the tolerance-relaxed volumetric scores; segmentation adds clDice and the
// clustering metrics. AUC requires a probability map.
inline MetricsReport evaluate(const Mask& pred, const Mask& gt, EvalTask task,
                              const ProbMap* prob = nullptr, double tol = 5.0,
                              int patch = 64) {
  MetricsReport rep;
  const TopoErrors te = topo_errors(pred, gt, patch);
  rep.beta0_err = te.beta0_err;
  rep.beta1_err = te.beta1_err;
  rep.chi_err = te.chi_err;
  rep.beta1_clamped = te.any_clamped;
  if (task == EvalTask::centerline) {
    const TolerantScores s = tolerant_centerline_scores(pred, gt, tol);
    rep.dice = s.dice;
    rep.acc = s.acc;
    if (prob) rep.auc = tolerant_auc(*prob, gt, tol);
  } else {
    rep.dice = dice(pred, gt);
    rep.cl_dice = cl_dice(pred, gt);
    rep.acc = acc(pred, gt);
    rep.ari = ari(pred, gt);
    rep.voi = voi(pred, gt);
    if (prob) rep.auc = tolerant_auc(*prob, gt, 0.0);
  }
  return rep;
}

}  // namespace tube

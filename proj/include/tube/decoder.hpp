// Numerical kernels of the graph decoder head: focal loss, bipartite
// matching cost between predicted and ground-truth nodes, an exact
// assignment solver, the matching and adjacency losses, and the dynamic
// link-prediction forward pass that emits a P x P adjacency matrix for any
// number of matched queries. Weights and query features are plain inputs;
// nothing here trains.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tube {

// Small dense row-major matrix, enough for the decoder-side math.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
    if (r < 1 || c < 1) throw std::invalid_argument("Mat: bad shape");
  }

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return v[static_cast<size_t>(r) * cols + c];
  }
};

inline constexpr double kProbEps = 1e-7;

// Focal loss of a score s against a binary class, with probabilities
// clamped to [eps, 1-eps] before the logarithm.
inline double focal(double s, int c, double alpha, double gamma) {
  s = std::clamp(s, kProbEps, 1.0 - kProbEps);
  if (c == 1) {
    return -alpha * std::pow(1.0 - s, gamma) * std::log(s);
  }
  return -(1.0 - alpha) * std::pow(s, gamma) * std::log(1.0 - s);
}

struct MatchConfig {
  double lambda_class = 0.2;
  double lambda_coord = 0.5;
  double alpha = 0.6;
  double gamma = 2.0;

  // Profile for sparse road networks.
  static MatchConfig roads() { return {0.2, 0.5, 0.75, 2.0}; }
};

// K predicted nodes: a score in (0,1) and a coordinate in the unit square.
struct PredNodes {
  std::vector<double> scores;
  std::vector<std::array<double, 2>> coords;

  int count() const { return static_cast<int>(scores.size()); }

  void validate() const {
    if (scores.size() != coords.size()) {
      throw std::invalid_argument("PredNodes: scores/coords size mismatch");
    }
    for (const auto& c : coords) {
      if (!(c[0] >= 0.0 && c[0] <= 1.0 && c[1] >= 0.0 && c[1] <= 1.0)) {
        throw std::invalid_argument("PredNodes: coordinate outside unit square");
      }
    }
  }
};

// P ground-truth nodes; slots P..K-1 of the matching problem are padding.
struct GtNodes {
  std::vector<std::array<double, 2>> coords;

  int count() const { return static_cast<int>(coords.size()); }
};

struct Assignment {
  // sigma[i] is the prediction index assigned to ground-truth slot i
  // (including padding slots); a permutation of 0..K-1.
  std::vector<int> sigma;
};

// K x K matching cost. Rows are ground-truth slots, columns predictions.
// Padding rows are identically zero; real rows combine the focal class
// margin focal(s,1) - focal(s,0) with the l1 coordinate distance.
inline Mat match_cost(const GtNodes& gt, const PredNodes& pred,
                      const MatchConfig& cfg) {
  pred.validate();
  const int k = pred.count();
  const int p = gt.count();
  if (p > k) {
    throw std::invalid_argument(
        "match_cost: more ground-truth nodes than predictions");
  }
  Mat cost(k, k, 0.0);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < k; ++j) {
      const double cls =
          focal(pred.scores[j], 1, cfg.alpha, cfg.gamma) -
          focal(pred.scores[j], 0, cfg.alpha, cfg.gamma);
      const double l1 = std::abs(gt.coords[i][0] - pred.coords[j][0]) +
                        std::abs(gt.coords[i][1] - pred.coords[j][1]);
      cost(i, j) = cfg.lambda_class * cls + cfg.lambda_coord * l1;
    }
  }
  return cost;
}

namespace detail {

// O(n^3) shortest-augmenting-path assignment solver with dual potentials.
// Fills rowsol (row -> column) and the feasible duals u, v satisfying
// cost(i,j) - u[i] - v[j] >= 0 with equality on assigned pairs.
inline void solve_assignment(const Mat& cost, std::vector<int>& rowsol,
                             std::vector<double>& u, std::vector<double>& v) {
  const int n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  rowsol.assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j]) rowsol[p[j] - 1] = j - 1;
  }
}

inline double row_order_cost(const Mat& cost, const std::vector<int>& sol) {
  double total = 0.0;
  for (int i = 0; i < cost.rows; ++i) total += cost(i, sol[i]);
  return total;
}

}  // namespace detail

// Exact minimum-cost assignment on a square matrix. Among all minimising
// permutations, returns the lexicographically smallest one; rows are fixed
// in order and a candidate column is kept only when an optimal completion
// exists (certified by re-solving the remaining subproblem). Candidate
// columns are pre-filtered through complementary slackness on the duals of
// the unconstrained solve, so the re-solves only trigger on ties.
inline Assignment hungarian(const Mat& cost) {
  if (cost.rows != cost.cols) {
    throw std::invalid_argument("hungarian: matrix must be square");
  }
  const int n = cost.rows;
  for (double x : cost.v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("hungarian: non-finite cost entry");
    }
  }
  std::vector<int> cur;
  std::vector<double> u, v;
  detail::solve_assignment(cost, cur, u, v);
  const double best = detail::row_order_cost(cost, cur);
  const double tol = 1e-9 * (1.0 + std::abs(best));

  std::vector<int> sigma(n, -1);
  std::vector<char> used(n, 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      if (j == cur[i]) {
        sigma[i] = j;  // current witness already completes optimally
        break;
      }
      // Complementary slackness: an optimal assignment can only use pairs
      // with zero reduced cost under the base duals.
      if (cost(i, j) - u[i + 1] - v[j + 1] > tol) continue;
      // Certify candidate j by solving the remaining rows exactly.
      const int m = n - i - 1;
      double total = fixed_cost + cost(i, j);
      std::vector<int> sub_cols;
      sub_cols.reserve(m);
      for (int jj = 0; jj < n; ++jj) {
        if (!used[jj] && jj != j) sub_cols.push_back(jj);
      }
      std::vector<int> sub_sol;
      if (m > 0) {
        Mat sub(m, m);
        for (int r = 0; r < m; ++r) {
          for (int c = 0; c < m; ++c) {
            sub(r, c) = cost(i + 1 + r, sub_cols[c]);
          }
        }
        std::vector<double> su, sv;
        detail::solve_assignment(sub, sub_sol, su, sv);
        total += detail::row_order_cost(sub, sub_sol);
      }
      if (total <= best + tol) {
        sigma[i] = j;
        for (int r = 0; r < m; ++r) cur[i + 1 + r] = sub_cols[sub_sol[r]];
        break;
      }
    }
    used[sigma[i]] = 1;
    fixed_cost += cost(i, sigma[i]);
  }
  return {std::move(sigma)};
}

inline double assignment_cost(const Mat& cost, const Assignment& a) {
  return detail::row_order_cost(cost, a.sigma);
}

// One ROI sample of the matching loss: gt nodes, predictions and the
// assignment produced by hungarian() on their match_cost.
struct MatchSample {
  GtNodes gt;
  PredNodes pred;
  Assignment assignment;
};

// Matching loss for one sample: every slot contributes the focal term
// (padding slots count as negatives) and real slots add the weighted l1
// coordinate error.
inline double hungarian_loss_sample(const MatchSample& s,
                                    const MatchConfig& cfg) {
  const int k = s.pred.count();
  const int p = s.gt.count();
  if (static_cast<int>(s.assignment.sigma.size()) != k) {
    throw std::invalid_argument("hungarian_loss: assignment size mismatch");
  }
  double loss = 0.0;
  for (int i = 0; i < k; ++i) {
    const int j = s.assignment.sigma[i];
    const int cls = i < p ? 1 : 0;
    loss += cfg.lambda_class * focal(s.pred.scores[j], cls, cfg.alpha, cfg.gamma);
    if (i < p) {
      loss += cfg.lambda_coord *
              (std::abs(s.pred.coords[j][0] - s.gt.coords[i][0]) +
               std::abs(s.pred.coords[j][1] - s.gt.coords[i][1]));
    }
  }
  return loss;
}

inline double hungarian_loss(const std::vector<MatchSample>& samples,
                             const MatchConfig& cfg) {
  double loss = 0.0;
  for (const auto& s : samples) loss += hungarian_loss_sample(s, cfg);
  return loss;
}

struct AdjacencyLossDetail {
  double value = 0.0;
  bool positive_dropped = false;  // no positive off-diagonal entries
  bool negative_dropped = false;  // no negative off-diagonal entries
};

// Class-balanced binary cross entropy over the off-diagonal adjacency
// entries, normalised by the positive/negative totals across all samples
// (0.5 mass to each class). When a class is absent its half-term is
// dropped and flagged.
inline AdjacencyLossDetail adjacency_loss_detail(
    const std::vector<std::pair<Mat, Mat>>& samples) {
  long n_pos = 0, n_neg = 0;
  for (const auto& [a_gt, a_pred] : samples) {
    if (a_gt.rows != a_gt.cols || a_pred.rows != a_pred.cols ||
        a_gt.rows != a_pred.rows) {
      throw std::invalid_argument("adjacency_loss: shape mismatch");
    }
    for (int i = 0; i < a_gt.rows; ++i) {
      for (int j = 0; j < a_gt.cols; ++j) {
        if (i == j) continue;
        if (a_gt(i, j) != 0.0) {
          ++n_pos;
        } else {
          ++n_neg;
        }
      }
    }
  }
  AdjacencyLossDetail out;
  out.positive_dropped = n_pos == 0;
  out.negative_dropped = n_neg == 0;
  double pos_sum = 0.0, neg_sum = 0.0;
  for (const auto& [a_gt, a_pred] : samples) {
    for (int i = 0; i < a_gt.rows; ++i) {
      for (int j = 0; j < a_gt.cols; ++j) {
        if (i == j) continue;
        const double pr = std::clamp(a_pred(i, j), kProbEps, 1.0 - kProbEps);
        if (a_gt(i, j) != 0.0) {
          pos_sum += -std::log(pr);
        } else {
          neg_sum += -std::log(1.0 - pr);
        }
      }
    }
  }
  if (n_pos > 0) out.value += 0.5 / static_cast<double>(n_pos) * pos_sum;
  if (n_neg > 0) out.value += 0.5 / static_cast<double>(n_neg) * neg_sum;
  return out;
}

inline double adjacency_loss(const Mat& a_gt, const Mat& a_pred) {
  return adjacency_loss_detail({{a_gt, a_pred}}).value;
}

// Plain MLP with ReLU between layers (none after the last). Weight matrices
// are (out x in).
struct Mlp {
  std::vector<Mat> weights;
  std::vector<std::vector<double>> biases;

  static Mlp identity(int dim, int out_dim) {
    // Copies the first min(dim, out_dim) inputs; extra outputs stay zero.
    Mlp m;
    Mat w(out_dim, dim, 0.0);
    for (int i = 0; i < std::min(dim, out_dim); ++i) w(i, i) = 1.0;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out_dim, 0.0);
    return m;
  }

  int in_dim() const { return weights.front().cols; }
  int out_dim() const { return weights.back().rows; }

  std::vector<double> apply(const std::vector<double>& x,
                            size_t* macs = nullptr) const {
    std::vector<double> cur = x;
    for (size_t layer = 0; layer < weights.size(); ++layer) {
      const Mat& w = weights[layer];
      if (static_cast<int>(cur.size()) != w.cols) {
        throw std::invalid_argument("Mlp: input dimension mismatch");
      }
      std::vector<double> next(w.rows);
      for (int r = 0; r < w.rows; ++r) {
        double acc = biases[layer][r];
        for (int c = 0; c < w.cols; ++c) acc += w(r, c) * cur[c];
        next[r] = acc;
      }
      if (macs) *macs += static_cast<size_t>(w.rows) * w.cols;
      if (layer + 1 < weights.size()) {
        for (double& t : next) t = std::max(0.0, t);
      }
      cur = std::move(next);
    }
    return cur;
  }
};

// Matched query features plus the two conditioning networks. ConditionMLP
// maps a C-dim query to C+1 values (per-query linear weights and bias);
// ValueMLP maps queries into the value space.
struct QueryFeatures {
  Mat q_tilde;        // P x C
  Mlp condition_mlp;  // C -> C + 1
  Mlp value_mlp;      // C -> C
};

struct LinkOpCounts {
  size_t mlp_macs = 0;   // ConditionMLP + ValueMLP applications, O(P * C^2)
  size_t gram_macs = 0;  // per-query linear layer over values, O(P^2 * C)
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Dynamic link prediction: each matched query conditions a linear layer
// that scores its connectivity against every query's value vector, giving
// a P x P matrix of probabilities for any P without retraining.
inline Mat link_forward(const QueryFeatures& q, LinkOpCounts* counts = nullptr) {
  const int p = q.q_tilde.rows;
  const int c = q.q_tilde.cols;
  if (q.condition_mlp.in_dim() != c || q.condition_mlp.out_dim() != c + 1) {
    throw std::invalid_argument("link_forward: ConditionMLP must map C -> C+1");
  }
  if (q.value_mlp.in_dim() != c || q.value_mlp.out_dim() != c) {
    throw std::invalid_argument("link_forward: ValueMLP must map C -> C");
  }
  size_t mlp_macs = 0;
  std::vector<std::vector<double>> w(p), values(p);
  for (int i = 0; i < p; ++i) {
    std::vector<double> row(q.q_tilde.v.begin() + static_cast<size_t>(i) * c,
                            q.q_tilde.v.begin() + static_cast<size_t>(i + 1) * c);
    w[i] = q.condition_mlp.apply(row, &mlp_macs);
    values[i] = q.value_mlp.apply(row, &mlp_macs);
  }
  size_t gram_macs = 0;
  Mat out(p, p);
  for (int i = 0; i < p; ++i) {
    const double bias = w[i][c];
    for (int j = 0; j < p; ++j) {
      double acc = bias;
      for (int k = 0; k < c; ++k) acc += w[i][k] * values[j][k];
      out(i, j) = sigmoid(acc);
    }
    gram_macs += static_cast<size_t>(p) * c;
  }
  if (counts) {
    counts->mlp_macs = mlp_macs;
    counts->gram_macs = gram_macs;
  }
  return out;
}

}  // namespace tube

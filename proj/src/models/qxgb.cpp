#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "hystlab/models.hpp"
#include "hystlab/random.hpp"

namespace hystlab::models {

double Tree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0)
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes[i].feature)] < nodes[i].threshold
                                     ? nodes[i].left
                                     : nodes[i].right);
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  std::function<std::size_t(std::size_t)> walk = [&](std::size_t i) -> std::size_t {
    if (nodes[i].feature < 0) return 0;
    return 1 + std::max(walk(static_cast<std::size_t>(nodes[i].left)), walk(static_cast<std::size_t>(nodes[i].right)));
  };
  return nodes.empty() ? 0 : walk(0);
}

namespace {

struct BuildNode {
  double g = 0.0, h = 0.0;
  std::size_t depth = 0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double score(double g, double h, double lambda, double alpha) {
  double t = 0.0;
  if (g > alpha) t = g - alpha;
  else if (g < -alpha) t = g + alpha;
  return t * t / (h + lambda);
}

// Midpoint stored as float32, nudged so that lo < t <= hi still holds.
double float_threshold(double lo, double hi) {
  auto t = static_cast<float>(lo + 0.5 * (hi - lo));
  if (static_cast<double>(t) <= lo) t = std::nextafter(static_cast<float>(lo), std::numeric_limits<float>::infinity());
  return static_cast<double>(t);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted, const QxgbParams& p)
      : x_(x), sorted_(sorted), p_(p) {}

  Tree build(std::span<const double> grad, std::span<const double> residual, double tau,
             std::span<const std::size_t> rows, std::span<const std::size_t> features) {
    const std::size_t n = x_.rows();
    node_of_.assign(n, -1);
    nodes_.assign(1, BuildNode{});
    for (auto r : rows) {
      node_of_[r] = 0;
      nodes_[0].g += grad[r];
      nodes_[0].h += 1.0;
    }

    std::vector<int> level{0};
    for (std::size_t depth = 0; depth < p_.max_depth && !level.empty(); ++depth) {
      std::vector<SplitCandidate> best(nodes_.size());
      std::vector<double> gl(nodes_.size()), hl(nodes_.size()), last(nodes_.size());
      std::vector<char> seen(nodes_.size());
      std::vector<char> active(nodes_.size(), 0);
      for (int k : level) active[static_cast<std::size_t>(k)] = 1;

      for (auto f : features) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (auto r : sorted_[f]) {
          const int k = node_of_[r];
          if (k < 0 || !active[static_cast<std::size_t>(k)]) continue;
          const auto ku = static_cast<std::size_t>(k);
          const double v = x_(r, f);
          if (seen[ku] && v > last[ku]) {
            const auto& nd = nodes_[ku];
            const double hr = nd.h - hl[ku];
            if (hl[ku] >= p_.min_child_weight && hr >= p_.min_child_weight) {
              const double gain = 0.5 * (score(gl[ku], hl[ku], p_.lambda, p_.alpha) +
                                         score(nd.g - gl[ku], hr, p_.lambda, p_.alpha) -
                                         score(nd.g, nd.h, p_.lambda, p_.alpha));
              if (gain > best[ku].gain + 1e-12) {
                best[ku].gain = gain;
                best[ku].feature = static_cast<int>(f);
                best[ku].threshold = float_threshold(last[ku], v);
              }
            }
          }
          gl[ku] += grad[r];
          hl[ku] += 1.0;
          last[ku] = v;
          seen[ku] = 1;
        }
      }

      std::vector<int> next;
      for (int k : level) {
        const auto& cand = best[static_cast<std::size_t>(k)];
        if (cand.feature < 0) continue;
        const int left = static_cast<int>(nodes_.size());
        nodes_.push_back(BuildNode{});
        nodes_.push_back(BuildNode{});
        auto& nd = nodes_[static_cast<std::size_t>(k)];
        nd.feature = cand.feature;
        nd.threshold = cand.threshold;
        nd.left = left;
        nd.right = left + 1;
        nodes_[static_cast<std::size_t>(left)].depth = depth + 1;
        nodes_[static_cast<std::size_t>(left) + 1].depth = depth + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (auto r : rows) {
        const int k = node_of_[r];
        const auto& nd = nodes_[static_cast<std::size_t>(k)];
        if (nd.feature < 0) continue;
        const int child = x_(r, static_cast<std::size_t>(nd.feature)) < nd.threshold ? nd.left : nd.right;
        node_of_[r] = child;
        nodes_[static_cast<std::size_t>(child)].g += grad[r];
        nodes_[static_cast<std::size_t>(child)].h += 1.0;
      }
      level = std::move(next);
    }

    // Leaf values: shrunken pinball-optimal step over the leaf's residuals.
    std::vector<std::vector<double>> leaf_res(nodes_.size());
    for (auto r : rows) leaf_res[static_cast<std::size_t>(node_of_[r])].push_back(residual[r]);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      auto& nd = nodes_[k];
      if (nd.feature >= 0 || leaf_res[k].empty()) continue;
      nd.value = p_.learning_rate * empirical_quantile(leaf_res[k], tau) * nd.h / (nd.h + p_.lambda);
      nd.value = static_cast<double>(static_cast<float>(nd.value));
    }

    Tree tree;
    emit(0, tree);
    return tree;
  }

 private:
  int emit(int k, Tree& tree) {
    const auto& nd = nodes_[static_cast<std::size_t>(k)];
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    if (nd.feature < 0) {
      tree.nodes.back().value = nd.value;
      return idx;
    }
    const int l = emit(nd.left, tree);
    const int r = emit(nd.right, tree);
    auto& out = tree.nodes[static_cast<std::size_t>(idx)];
    out.feature = nd.feature;
    out.threshold = nd.threshold;
    out.left = l;
    out.right = r;
    return idx;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const QxgbParams& p_;
  std::vector<int> node_of_;
  std::vector<BuildNode> nodes_;
};

}  // namespace

QxgbModel train_qxgb(const Matrix& x, std::span<const double> y, const QuantileLevels& quantiles,
                     const QxgbParams& params, std::uint64_t seed) {
  const std::size_t n = x.rows(), f = x.cols();
  require(y.size() == n, ErrorCode::DimensionMismatch, "label count does not match rows");
  require(n >= 2, ErrorCode::NoSamples, "QXGB needs at least two samples");
  require(params.learning_rate > 0.0 && params.subsample > 0.0 && params.subsample <= 1.0 &&
              params.colsample > 0.0 && params.colsample <= 1.0 && params.lambda >= 0.0 && params.alpha >= 0.0,
          ErrorCode::InvalidArgument, "bad QXGB parameters");
  for (double v : x.data()) require(std::isfinite(v), ErrorCode::Numeric, "non-finite feature value");
  for (double v : y) require(std::isfinite(v), ErrorCode::Numeric, "non-finite label");

  QxgbModel model;
  model.quantiles = quantiles;
  model.input_dim = f;
  model.params = params;
  model.seed = seed;

  // Split thresholds are stored as float32; sort on the values the stored
  // model will compare against so training and prediction route rows alike.
  Matrix xf = x;
  quantize_f32(xf.data());
  std::vector<std::vector<std::size_t>> sorted(f);
  for (std::size_t j = 0; j < f; ++j) {
    sorted[j].resize(n);
    std::iota(sorted[j].begin(), sorted[j].end(), 0);
    std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](std::size_t a, std::size_t b) { return xf(a, j) < xf(b, j); });
  }
  TreeBuilder builder(xf, sorted, params);

  const std::size_t n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.subsample * static_cast<double>(n))));
  const std::size_t n_cols = f == 0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(params.colsample * static_cast<double>(f))));

  for (std::size_t q = 0; q < quantiles.size(); ++q) {
    const double tau = quantiles[q];
    Rng rng(derive_seed(seed, q));
    const double base = static_cast<double>(static_cast<float>(empirical_quantile(y, tau)));
    model.base_scores.push_back(base);
    std::vector<double> pred(n, base), grad(n), resid(n);
    std::vector<Tree> trees;
    std::vector<std::size_t> all_rows(n), all_cols(f);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::iota(all_cols.begin(), all_cols.end(), 0);

    for (std::size_t m = 0; m < params.rounds; ++m) {
      for (std::size_t i = 0; i < n; ++i) {
        resid[i] = y[i] - pred[i];
        grad[i] = resid[i] >= 0.0 ? -tau : 1.0 - tau;
      }
      std::vector<std::size_t> rows = all_rows;
      if (n_rows < n) {
        rng.shuffle(std::span<std::size_t>(rows));
        rows.resize(n_rows);
        std::sort(rows.begin(), rows.end());
      }
      std::vector<std::size_t> cols = all_cols;
      if (n_cols < f) {
        rng.shuffle(std::span<std::size_t>(cols));
        cols.resize(n_cols);
        std::sort(cols.begin(), cols.end());
      }
      Tree tree = builder.build(grad, resid, tau, rows, cols);
      for (std::size_t i = 0; i < n; ++i) pred[i] += tree.predict(xf.row(i));
      trees.push_back(std::move(tree));
    }
    model.trees.push_back(std::move(trees));
  }
  return model;
}

Matrix predict_qxgb(const QxgbModel& model, const Matrix& x) {
  require(x.cols() == model.input_dim, ErrorCode::DimensionMismatch,
          "QXGB expects " + std::to_string(model.input_dim) + " features, got " + std::to_string(x.cols()));
  Matrix out(x.rows(), model.quantiles.size());
  std::vector<double> row(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto src = x.row(i);
    std::copy(src.begin(), src.end(), row.begin());
    quantize_f32(row);
    for (std::size_t q = 0; q < model.quantiles.size(); ++q) {
      double p = model.base_scores[q];
      for (const auto& t : model.trees[q]) p += t.predict(row);
      out(i, q) = p;
    }
  }
  return out;
}

}  // namespace hystlab::models

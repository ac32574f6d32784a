#include <cmath>

#include "hystlab/models.hpp"

namespace hystlab::models {

namespace {

void check_finite(const Matrix& x, std::span<const double> y) {
  for (double v : x.data()) require(std::isfinite(v), ErrorCode::Numeric, "non-finite feature value");
  for (double v : y) require(std::isfinite(v), ErrorCode::Numeric, "non-finite label");
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

LqrModel train_lqr(const Matrix& x, std::span<const double> y, const QuantileLevels& quantiles,
                   const LqrParams& params) {
  const std::size_t n = x.rows(), k = x.cols();
  require(y.size() == n, ErrorCode::DimensionMismatch, "label count does not match rows");
  require(n >= 2, ErrorCode::NoSamples, "LQR needs at least two samples");
  require(params.l1 >= 0.0 && params.learning_rate > 0.0, ErrorCode::InvalidArgument, "bad LQR parameters");
  check_finite(x, y);

  LqrModel model;
  model.quantiles = quantiles;
  model.input_dim = k;
  model.params = params;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (double tau : quantiles.levels()) {
    std::vector<double> beta(k, 0.0), best_beta(k, 0.0), grad(k);
    double b = empirical_quantile(y, tau), best_b = b;
    std::vector<double> pred(n);

    auto objective = [&](const std::vector<double>& w, double bias) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double p = bias;
        const auto row = x.row(i);
        for (std::size_t j = 0; j < k; ++j) p += row[j] * w[j];
        pred[i] = p;
        const double r = y[i] - p;
        loss += r >= 0.0 ? tau * r : (tau - 1.0) * r;
      }
      double l1 = 0.0;
      for (double v : w) l1 += std::abs(v);
      return loss * inv_n + params.l1 * l1;
    };

    double best = objective(beta, b);
    double lr = params.learning_rate;
    std::size_t since_best = 0, since_decay = 0;
    for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
      // pred holds the current iterate's predictions from the last objective call
      std::fill(grad.begin(), grad.end(), 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - pred[i];
        const double g = r > 0.0 ? -tau : (r < 0.0 ? 1.0 - tau : 0.0);
        if (g == 0.0) continue;
        gb += g;
        const auto row = x.row(i);
        for (std::size_t j = 0; j < k; ++j) grad[j] += g * row[j];
      }
      b -= lr * gb * inv_n;
      for (std::size_t j = 0; j < k; ++j) beta[j] = soft_threshold(beta[j] - lr * grad[j] * inv_n, lr * params.l1);

      const double obj = objective(beta, b);
      if (obj < best - 1e-8) {
        best = obj;
        best_beta = beta;
        best_b = b;
        since_best = 0;
        since_decay = 0;
      } else {
        ++since_best;
        if (++since_decay >= 20) {
          lr *= 0.5;
          since_decay = 0;
        }
      }
      if (since_best >= params.patience || lr < params.learning_rate * 1e-6) break;
    }
    quantize_f32(best_beta);
    model.weights.push_back(std::move(best_beta));
    model.intercepts.push_back(static_cast<double>(static_cast<float>(best_b)));
  }
  return model;
}

Matrix predict_lqr(const LqrModel& model, const Matrix& x) {
  require(x.cols() == model.input_dim, ErrorCode::DimensionMismatch,
          "LQR expects " + std::to_string(model.input_dim) + " features, got " + std::to_string(x.cols()));
  Matrix out(x.rows(), model.quantiles.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t q = 0; q < model.quantiles.size(); ++q) {
      double p = model.intercepts[q];
      for (std::size_t j = 0; j < model.input_dim; ++j) p += row[j] * model.weights[q][j];
      out(i, q) = p;
    }
  }
  return out;
}

}  // namespace hystlab::models

#include "hystlab/metrics.hpp"

namespace hystlab::metrics {

double pinball(double y, double yhat, double tau) {
  return y >= yhat ? tau * (y - yhat) : (1.0 - tau) * (yhat - y);
}

std::vector<double> per_quantile_loss(std::span<const double> y, const Matrix& predictions,
                                      const QuantileLevels& quantiles) {
  require(predictions.rows() == y.size() && predictions.cols() == quantiles.size(), ErrorCode::DimensionMismatch,
          "prediction table is " + std::to_string(predictions.rows()) + "x" + std::to_string(predictions.cols()) +
              ", expected " + std::to_string(y.size()) + "x" + std::to_string(quantiles.size()));
  require(!y.empty(), ErrorCode::NoSamples, "no samples to evaluate");
  std::vector<double> out(quantiles.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t q = 0; q < quantiles.size(); ++q) out[q] += pinball(y[i], predictions(i, q), quantiles[q]);
  for (auto& v : out) v /= static_cast<double>(y.size());
  return out;
}

double aql(std::span<const double> y, const Matrix& predictions, const QuantileLevels& quantiles) {
  const auto per = per_quantile_loss(y, predictions, quantiles);
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(per.size());
}

double coverage(std::span<const double> y, std::span<const double> low, std::span<const double> high) {
  require(low.size() == y.size() && high.size() == y.size(), ErrorCode::DimensionMismatch,
          "coverage bounds do not match labels");
  if (y.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (low[i] <= y[i] && y[i] <= high[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace hystlab::metrics

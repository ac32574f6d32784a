#include <algorithm>
#include <cmath>

#include "hystlab/models.hpp"

namespace hystlab::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lqr: return "lqr";
    case ModelKind::Qxgb: return "qxgb";
    case ModelKind::Qgru: return "qgru";
  }
  return "lqr";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "lqr") return ModelKind::Lqr;
  if (name == "qxgb") return ModelKind::Qxgb;
  if (name == "qgru") return ModelKind::Qgru;
  fail(ErrorCode::InvalidArgument, "unknown model kind '" + name + "'");
}

std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "momentum"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "momentum") return Optimizer::Momentum;
  fail(ErrorCode::InvalidArgument, "unknown optimizer '" + name + "'");
}

double empirical_quantile(std::span<const double> y, double tau) {
  require(!y.empty(), ErrorCode::NoSamples, "quantile of an empty sample");
  std::vector<double> s(y.begin(), y.end());
  const double pos = std::ceil(tau * static_cast<double>(s.size()) - 1e-9);
  const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(s.size()))) - 1;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
  return s[k];
}

void quantize_f32(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

ModelKind kind_of(const QuantileModel& m) {
  switch (m.index()) {
    case 0: return ModelKind::Lqr;
    case 1: return ModelKind::Qxgb;
    default: return ModelKind::Qgru;
  }
}

const QuantileLevels& quantiles_of(const QuantileModel& m) {
  return std::visit([](const auto& model) -> const QuantileLevels& { return model.quantiles; }, m);
}

Matrix repair_quantile_crossing(const Matrix& predictions) {
  Matrix out = predictions;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    std::sort(row.begin(), row.end());
  }
  return out;
}

}  // namespace hystlab::models

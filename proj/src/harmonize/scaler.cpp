#include <algorithm>
#include <limits>

#include "hystlab/harmonize.hpp"

namespace hystlab::harmonize {

namespace {

double scale_value(double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; }

}  // namespace

MinMaxScalerParams fit_minmax(const Matrix& data, std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "min-max fit needs at least one row");
  MinMaxScalerParams p;
  p.min.assign(data.cols(), std::numeric_limits<double>::infinity());
  p.max.assign(data.cols(), -std::numeric_limits<double>::infinity());
  for (auto r : rows) {
    require(r < data.rows(), ErrorCode::InvalidArgument, "row index out of range");
    for (std::size_t c = 0; c < data.cols(); ++c) {
      p.min[c] = std::min(p.min[c], data(r, c));
      p.max[c] = std::max(p.max[c], data(r, c));
    }
  }
  return p;
}

MinMaxScalerParams fit_minmax(const SeqTensor& data, std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "min-max fit needs at least one row");
  MinMaxScalerParams p;
  p.min.assign(data.features, std::numeric_limits<double>::infinity());
  p.max.assign(data.features, -std::numeric_limits<double>::infinity());
  for (auto r : rows) {
    require(r < data.n, ErrorCode::InvalidArgument, "sample index out of range");
    for (std::size_t t = 0; t < data.steps; ++t)
      for (std::size_t f = 0; f < data.features; ++f) {
        p.min[f] = std::min(p.min[f], data.at(r, t, f));
        p.max[f] = std::max(p.max[f], data.at(r, t, f));
      }
  }
  return p;
}

Matrix apply_minmax(const Matrix& data, const MinMaxScalerParams& params) {
  require(params.min.size() == data.cols() && params.max.size() == data.cols(),
          ErrorCode::DimensionMismatch, "scaler has " + std::to_string(params.min.size()) +
                                            " features, data has " + std::to_string(data.cols()));
  Matrix out = data;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = scale_value(out(r, c), params.min[c], params.max[c]);
  return out;
}

SeqTensor apply_minmax(const SeqTensor& data, const MinMaxScalerParams& params) {
  require(params.min.size() == data.features && params.max.size() == data.features,
          ErrorCode::DimensionMismatch, "scaler has " + std::to_string(params.min.size()) +
                                            " features, tensor has " + std::to_string(data.features));
  SeqTensor out = data;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const std::size_t f = k % out.features;
    out.values[k] = scale_value(out.values[k], params.min[f], params.max[f]);
  }
  return out;
}

nlohmann::json scaler_to_json(const MinMaxScalerParams& p) {
  return {{"min", p.min}, {"max", p.max}, {"fitted_on", p.fitted_on}};
}

MinMaxScalerParams scaler_from_json(const nlohmann::json& doc) {
  MinMaxScalerParams p;
  try {
    p.min = doc.at("min").get<std::vector<double>>();
    p.max = doc.at("max").get<std::vector<double>>();
    p.fitted_on = doc.value("fitted_on", "");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("scaler: ") + e.what());
  }
  require(p.min.size() == p.max.size(), ErrorCode::Format, "scaler min/max length mismatch");
  for (std::size_t i = 0; i < p.min.size(); ++i)
    require(p.min[i] <= p.max[i], ErrorCode::Format, "scaler min exceeds max");
  return p;
}

}  // namespace hystlab::harmonize

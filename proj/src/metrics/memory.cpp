#include "hystlab/metrics.hpp"

namespace hystlab::metrics {

std::size_t rom_bytes(const models::QuantileModel& m, const nlohmann::json& pipeline) {
  return models::serialize_model(m, pipeline).size();
}

std::size_t blob_bytes(const models::QuantileModel& m) { return models::parameter_blob(m).size() * sizeof(float); }

double rom_mb(const models::QuantileModel& m, const nlohmann::json& pipeline) {
  return static_cast<double>(rom_bytes(m, pipeline)) / kBytesPerMb;
}

std::size_t ram_bytes(const models::QuantileModel& m, InputShape shape) {
  std::size_t values = 0;
  if (const auto* l = std::get_if<models::LqrModel>(&m)) {
    values = l->input_dim;
  } else if (const auto* x = std::get_if<models::QxgbModel>(&m)) {
    values = x->input_dim + x->params.max_depth;
  } else {
    const auto& g = std::get<models::QgruModel>(m);
    const std::size_t features = shape.features ? shape.features : g.input_dim;
    values = shape.steps * features + g.layers * 4 * g.hidden + g.quantiles.size();
  }
  return values * 4;
}

double ram_mb(const models::QuantileModel& m, InputShape shape) {
  return static_cast<double>(ram_bytes(m, shape)) / kBytesPerMb;
}

}  // namespace hystlab::metrics

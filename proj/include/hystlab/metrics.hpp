#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hystlab/matrix.hpp"
#include "hystlab/models.hpp"

namespace hystlab::metrics {

using core::QuantileLevels;

// tau (y - yhat) if y >= yhat, else (1 - tau)(yhat - y).
double pinball(double y, double yhat, double tau);

// Mean pinball loss over all samples and quantile columns.
double aql(std::span<const double> y, const Matrix& predictions, const QuantileLevels& quantiles);

std::vector<double> per_quantile_loss(std::span<const double> y, const Matrix& predictions,
                                      const QuantileLevels& quantiles);

// Fraction of samples with low <= y <= high.
double coverage(std::span<const double> y, std::span<const double> low, std::span<const double> high);

inline constexpr double kBytesPerMb = 1024.0 * 1024.0;

// Exact serialized size of the model (magic + header + float32 blob),
// including any pipeline state stored alongside it.
std::size_t rom_bytes(const models::QuantileModel& m, const nlohmann::json& pipeline = {});
std::size_t blob_bytes(const models::QuantileModel& m);
double rom_mb(const models::QuantileModel& m, const nlohmann::json& pipeline = {});

// Inference input shape: statistical models see one row of `features`;
// QGRU sees `steps` x `features`.
struct InputShape {
  std::size_t steps = 1;
  std::size_t features = 0;
};

// Analytic peak working set for one inference at 4 bytes per value:
//   LQR   one feature row                          K
//   QXGB  one feature row + traversal stack         K + max_depth
//   QGRU  input window + per layer h, z, r, h~ + head outputs
//         T*F + layers*4*H + |Q|
std::size_t ram_bytes(const models::QuantileModel& m, InputShape shape);
double ram_mb(const models::QuantileModel& m, InputShape shape);

struct EvalReport {
  double aql = 0.0;
  std::vector<std::pair<double, double>> per_quantile_loss;  // (tau, loss), ascending tau
  double coverage_90 = 0.0;  // between the lowest and highest quantile
  double rom_mb = 0.0;
  double ram_mb = 0.0;
  std::size_t n_samples = 0;
};

EvalReport evaluate(std::span<const double> y, const Matrix& predictions, const QuantileLevels& quantiles,
                    double rom_mb = 0.0, double ram_mb = 0.0);

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& doc);
std::string csv_header(const EvalReport& r);
std::string csv_row(const EvalReport& r);

}  // namespace hystlab::metrics

#include "hystlab/metrics.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::metrics {

using nlohmann::json;

EvalReport evaluate(std::span<const double> y, const Matrix& predictions, const QuantileLevels& quantiles,
                    double rom, double ram) {
  EvalReport r;
  const auto per = per_quantile_loss(y, predictions, quantiles);
  double s = 0.0;
  for (std::size_t q = 0; q < per.size(); ++q) {
    r.per_quantile_loss.emplace_back(quantiles[q], per[q]);
    s += per[q];
  }
  r.aql = s / static_cast<double>(per.size());
  r.coverage_90 = coverage(y, predictions.column(0), predictions.column(predictions.cols() - 1));
  r.rom_mb = rom;
  r.ram_mb = ram;
  r.n_samples = y.size();
  return r;
}

json to_json(const EvalReport& r) {
  json per = json::array();
  for (const auto& [tau, loss] : r.per_quantile_loss) per.push_back({{"tau", tau}, {"loss", loss}});
  return {{"aql", r.aql}, {"per_quantile_loss", per}, {"coverage_90", r.coverage_90},
          {"rom_mb", r.rom_mb}, {"ram_mb", r.ram_mb}, {"n_samples", r.n_samples}};
}

EvalReport report_from_json(const json& doc) {
  try {
    EvalReport r;
    r.aql = doc.at("aql").get<double>();
    for (const auto& e : doc.at("per_quantile_loss"))
      r.per_quantile_loss.emplace_back(e.at("tau").get<double>(), e.at("loss").get<double>());
    r.coverage_90 = doc.at("coverage_90").get<double>();
    r.rom_mb = doc.at("rom_mb").get<double>();
    r.ram_mb = doc.at("ram_mb").get<double>();
    r.n_samples = doc.at("n_samples").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("evaluation report: ") + e.what());
  }
}

std::string csv_header(const EvalReport& r) {
  std::string h = "n_samples,aql";
  for (const auto& [tau, loss] : r.per_quantile_loss) h += ",loss_q" + textio::format_double(tau);
  return h + ",coverage_90,rom_mb,ram_mb";
}

std::string csv_row(const EvalReport& r) {
  std::string s = std::to_string(r.n_samples) + "," + textio::format_double(r.aql);
  for (const auto& [tau, loss] : r.per_quantile_loss) s += "," + textio::format_double(loss);
  return s + "," + textio::format_double(r.coverage_90) + "," + textio::format_double(r.rom_mb) + "," +
         textio::format_double(r.ram_mb);
}

}  // namespace hystlab::metrics

#include <cmath>

#include "hystlab/synthdata.hpp"

namespace hystlab::synthdata {

double hysteresis_step(double h, double current_a, double dt_s, double gamma, double capacity_ah) {
  if (current_a == 0.0) return h;
  const double decay = std::exp(-std::abs(current_a * gamma * (dt_s / 3600.0) / capacity_ah));
  const double target = current_a < 0.0 ? 1.0 : -1.0;  // charging pulls towards +1
  return decay * h + (1.0 - decay) * target;
}

OracleTrace label_oracle(const core::DrivingCycle& cycle, const Chemistry& chem) {
  const auto& current = cycle.channel(core::ChannelId::BatteryCurrent);
  const std::size_t n = cycle.length();
  OracleTrace out;
  out.h.assign(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = cycle.timestamps[k + 1] - cycle.timestamps[k];
    out.h[k + 1] = hysteresis_step(out.h[k], current[k], dt, chem.gamma, chem.capacity_ah);
  }
  for (std::size_t k = 0; k < n; ++k)
    if (cycle.soc_correction[k]) out.correction_labels.push_back(out.h[k]);
  return out;
}

}  // namespace hystlab::synthdata

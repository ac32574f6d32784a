#include <algorithm>

#include "hystlab/harmonize.hpp"

namespace hystlab::harmonize {

namespace {

double scale_for(ChannelId id, core::UnitTag unit) {
  using core::UnitTag;
  switch (id) {
    case ChannelId::CellVoltage:
      if (unit == UnitTag::V) return 1.0;
      if (unit == UnitTag::mV) return 1e-3;
      break;
    case ChannelId::BatteryCurrent:
      if (unit == UnitTag::A) return 1.0;
      if (unit == UnitTag::mA) return 1e-3;
      break;
    case ChannelId::CellTemperature:
      if (unit == UnitTag::degC) return 1.0;
      break;
  }
  fail(ErrorCode::InvalidArgument, "unit " + std::string(core::unit_name(unit)) + " is not valid for " +
                                       std::string(core::channel_name(id)));
}

}  // namespace

DrivingCycle standardize_units(const DrivingCycle& cycle, const core::UnitMap& units) {
  DrivingCycle out = cycle;
  for (auto id : core::kAllChannels) {
    if (!out.has(id)) continue;
    auto it = units.find(id);
    require(it != units.end(), ErrorCode::InvalidArgument,
            "cycle " + cycle.cycle_id + ": no unit tag for " + std::string(core::channel_name(id)));
    const double scale = scale_for(id, it->second);
    if (scale == 1.0) continue;
    for (double& v : out.channel(id)) v *= scale;
  }
  return out;
}

std::vector<DrivingCycle> filter_cycles(std::vector<DrivingCycle> cycles) {
  std::erase_if(cycles, [](const DrivingCycle& c) { return !c.has_all_channels(); });
  return cycles;
}

}  // namespace hystlab::harmonize

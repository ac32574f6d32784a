#include <algorithm>
#include <cmath>

#include "hystlab/synthdata.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::synthdata {

using nlohmann::json;

double OcvTable::operator()(double s) const {
  s = std::clamp(s, soc.front(), soc.back());
  const auto it = std::upper_bound(soc.begin(), soc.end(), s);
  if (it == soc.end()) return volts.back();
  const auto hi = static_cast<std::size_t>(it - soc.begin());
  const std::size_t lo = hi - 1;
  const double w = (s - soc[lo]) / (soc[hi] - soc[lo]);
  return volts[lo] + w * (volts[hi] - volts[lo]);
}

namespace {

void validate_table(const OcvTable& t, const std::string& name) {
  require(t.soc.size() >= 2 && t.soc.size() == t.volts.size(), ErrorCode::InvalidArgument,
          name + ": needs at least two matching SoC/voltage knots");
  require(t.soc.front() == 0.0 && t.soc.back() == 1.0, ErrorCode::InvalidArgument, name + ": SoC must span [0, 1]");
  for (std::size_t i = 1; i < t.soc.size(); ++i) {
    require(t.soc[i] > t.soc[i - 1], ErrorCode::InvalidArgument, name + ": SoC knots must increase");
    require(t.volts[i] >= t.volts[i - 1], ErrorCode::InvalidArgument, name + ": OCV must be monotone");
  }
}

}  // namespace

void Chemistry::validate() const {
  validate_table(ocv_charge, "ocv_charge");
  validate_table(ocv_discharge, "ocv_discharge");
  // Both tables are piecewise linear, so checking every knot of either suffices.
  for (const auto* t : {&ocv_charge, &ocv_discharge})
    for (double s : t->soc)
      require(ocv_charge(s) >= ocv_discharge(s), ErrorCode::InvalidArgument,
              "charging OCV must not lie below discharging OCV");
  require(gamma > 0.0 && capacity_ah > 0.0 && resistance_ohm >= 0.0, ErrorCode::InvalidArgument,
          "gamma and capacity must be positive, resistance non-negative");
}

void FleetSpec::validate() const {
  require(!fleet_id.empty(), ErrorCode::InvalidArgument, "fleet_id must not be empty");
  require(n_cycles >= 1, ErrorCode::InvalidArgument, "n_cycles must be positive");
  require(mean_cycle_hours > 0.0 && min_duration_fraction >= 0.0 && min_duration_fraction < 1.0,
          ErrorCode::InvalidArgument, "bad cycle duration settings");
  require(native_rate_hz > 0.0 && native_rate_hz <= 10.0, ErrorCode::InvalidArgument,
          "native rate must lie in (0, 10] Hz");
  require(current.drive_max_a > 0.0 && current.regen_max_a >= 0.0 && current.charge_max_a > current.charge_min_a &&
              current.charge_min_a > 0.0 && current.noise_a >= 0.0,
          ErrorCode::InvalidArgument, "degenerate current envelope");
  require(temperature.max_c > temperature.min_c && temperature.start_min_c >= temperature.min_c &&
              temperature.start_max_c <= temperature.max_c && temperature.start_max_c >= temperature.start_min_c,
          ErrorCode::InvalidArgument, "degenerate temperature range");
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(regime.drive_probability) && prob(regime.charge_fraction) && prob(regime.continue_probability) &&
              prob(regime.long_rest_probability) && prob(missing_channel_probability),
          ErrorCode::InvalidArgument, "probabilities must lie in [0, 1]");
  require(regime.drive_bout_min_s > 0.0 && regime.drive_bout_mean_s >= regime.drive_bout_min_s &&
              regime.charge_bout_min_s > 0.0 && regime.charge_bout_mean_s >= regime.charge_bout_min_s &&
              regime.level_min_s > 0.0 && regime.level_mean_s >= regime.level_min_s &&
              regime.short_rest_min_s > 0.0 && regime.short_rest_max_s >= regime.short_rest_min_s &&
              regime.long_rest_extra_max_s >= 0.0,
          ErrorCode::InvalidArgument, "bad bout durations");
  require(correction.min_rest_s > regime.short_rest_max_s, ErrorCode::InvalidArgument,
          "short rests must stay below the correction rest duration");
  require(voltage_noise_v >= 0.0, ErrorCode::InvalidArgument, "voltage noise must be non-negative");
  require(voltage_unit == core::UnitTag::V || voltage_unit == core::UnitTag::mV, ErrorCode::InvalidArgument,
          "voltage unit must be V or mV");
  require(current_unit == core::UnitTag::A || current_unit == core::UnitTag::mA, ErrorCode::InvalidArgument,
          "current unit must be A or mA");
  chemistry.validate();
}

FleetSpec preset_fleet_a() {
  FleetSpec s;
  s.fleet_id = "A";
  s.n_cycles = 200;
  s.seed = 11;
  s.mean_cycle_hours = 30.4 / 24.0;
  const std::vector<double> soc{0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0};
  const std::vector<double> dis{3.00, 3.28, 3.42, 3.53, 3.60, 3.65, 3.70, 3.77, 3.85, 3.94, 4.04, 4.10, 4.16};
  const std::vector<double> band{0.070, 0.065, 0.060, 0.050, 0.042, 0.036, 0.032, 0.028, 0.025, 0.022, 0.020, 0.018, 0.016};
  std::vector<double> chg(dis.size());
  for (std::size_t i = 0; i < dis.size(); ++i) chg[i] = dis[i] + band[i];
  s.chemistry = Chemistry{{soc, chg}, {soc, dis}, 15.0, 60.0, 8e-4};
  return s;
}

FleetSpec preset_fleet_b() {
  FleetSpec s;
  s.fleet_id = "B";
  s.n_cycles = 80;
  s.seed = 23;
  s.mean_cycle_hours = 47.4 / 24.0;
  s.current = CurrentEnvelope{140.0, 50.0, 15.0, 45.0, 2.0};
  s.temperature = TemperatureRange{-18.3, 48.9, 5.0, 45.0};
  const std::vector<double> soc{0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0};
  const std::vector<double> dis{2.80, 3.05, 3.15, 3.22, 3.26, 3.28, 3.29, 3.30, 3.31, 3.33, 3.36, 3.40, 3.50};
  const std::vector<double> band{0.050, 0.045, 0.040, 0.036, 0.034, 0.032, 0.032, 0.032, 0.033, 0.034, 0.036, 0.038, 0.040};
  std::vector<double> chg(dis.size());
  for (std::size_t i = 0; i < dis.size(); ++i) chg[i] = dis[i] + band[i];
  s.chemistry = Chemistry{{soc, chg}, {soc, dis}, 2.5, 40.0, 1.5e-3};
  s.regime.charge_fraction = 0.35;
  s.voltage_unit = core::UnitTag::mV;
  return s;
}

json spec_to_json(const FleetSpec& s) {
  const auto& c = s.chemistry;
  const auto& r = s.regime;
  return {
      {"fleet_id", s.fleet_id},
      {"n_cycles", s.n_cycles},
      {"seed", s.seed},
      {"mean_cycle_hours", s.mean_cycle_hours},
      {"min_duration_fraction", s.min_duration_fraction},
      {"native_rate_hz", s.native_rate_hz},
      {"current",
       {{"drive_max_a", s.current.drive_max_a}, {"regen_max_a", s.current.regen_max_a},
        {"charge_min_a", s.current.charge_min_a}, {"charge_max_a", s.current.charge_max_a},
        {"noise_a", s.current.noise_a}}},
      {"temperature",
       {{"min_c", s.temperature.min_c}, {"max_c", s.temperature.max_c},
        {"start_min_c", s.temperature.start_min_c}, {"start_max_c", s.temperature.start_max_c}}},
      {"chemistry",
       {{"ocv_soc", c.ocv_discharge.soc}, {"ocv_discharge", c.ocv_discharge.volts},
        {"ocv_charge_soc", c.ocv_charge.soc}, {"ocv_charge", c.ocv_charge.volts},
        {"gamma", c.gamma}, {"capacity_ah", c.capacity_ah}, {"resistance_ohm", c.resistance_ohm}}},
      {"regime",
       {{"drive_probability", r.drive_probability}, {"charge_fraction", r.charge_fraction},
        {"continue_probability", r.continue_probability}, {"long_rest_probability", r.long_rest_probability},
        {"drive_bout_min_s", r.drive_bout_min_s}, {"drive_bout_mean_s", r.drive_bout_mean_s},
        {"charge_bout_min_s", r.charge_bout_min_s}, {"charge_bout_mean_s", r.charge_bout_mean_s},
        {"level_min_s", r.level_min_s}, {"level_mean_s", r.level_mean_s},
        {"short_rest_min_s", r.short_rest_min_s}, {"short_rest_max_s", r.short_rest_max_s},
        {"long_rest_extra_max_s", r.long_rest_extra_max_s}}},
      {"correction", {{"min_rest_s", s.correction.min_rest_s}}},
      {"voltage_noise_v", s.voltage_noise_v},
      {"missing_channel_probability", s.missing_channel_probability},
      {"voltage_unit", std::string(core::unit_name(s.voltage_unit))},
      {"current_unit", std::string(core::unit_name(s.current_unit))},
  };
}

namespace {

template <class T>
void take(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

FleetSpec spec_from_json(const json& doc, const FleetSpec& base) {
  FleetSpec s = base;
  try {
    if (doc.contains("preset")) {
      const auto name = doc.at("preset").get<std::string>();
      if (name == "A") s = preset_fleet_a();
      else if (name == "B") s = preset_fleet_b();
      else fail(ErrorCode::InvalidArgument, "unknown fleet preset '" + name + "'");
    }
    take(doc, "fleet_id", s.fleet_id);
    take(doc, "n_cycles", s.n_cycles);
    take(doc, "seed", s.seed);
    take(doc, "mean_cycle_hours", s.mean_cycle_hours);
    take(doc, "min_duration_fraction", s.min_duration_fraction);
    take(doc, "native_rate_hz", s.native_rate_hz);
    if (doc.contains("current")) {
      const auto& c = doc.at("current");
      take(c, "drive_max_a", s.current.drive_max_a);
      take(c, "regen_max_a", s.current.regen_max_a);
      take(c, "charge_min_a", s.current.charge_min_a);
      take(c, "charge_max_a", s.current.charge_max_a);
      take(c, "noise_a", s.current.noise_a);
    }
    if (doc.contains("temperature")) {
      const auto& t = doc.at("temperature");
      take(t, "min_c", s.temperature.min_c);
      take(t, "max_c", s.temperature.max_c);
      take(t, "start_min_c", s.temperature.start_min_c);
      take(t, "start_max_c", s.temperature.start_max_c);
    }
    if (doc.contains("chemistry")) {
      const auto& c = doc.at("chemistry");
      take(c, "ocv_soc", s.chemistry.ocv_discharge.soc);
      s.chemistry.ocv_charge.soc = s.chemistry.ocv_discharge.soc;
      take(c, "ocv_charge_soc", s.chemistry.ocv_charge.soc);
      take(c, "ocv_discharge", s.chemistry.ocv_discharge.volts);
      take(c, "ocv_charge", s.chemistry.ocv_charge.volts);
      take(c, "gamma", s.chemistry.gamma);
      take(c, "capacity_ah", s.chemistry.capacity_ah);
      take(c, "resistance_ohm", s.chemistry.resistance_ohm);
    }
    if (doc.contains("regime")) {
      const auto& r = doc.at("regime");
      take(r, "drive_probability", s.regime.drive_probability);
      take(r, "charge_fraction", s.regime.charge_fraction);
      take(r, "continue_probability", s.regime.continue_probability);
      take(r, "long_rest_probability", s.regime.long_rest_probability);
      take(r, "drive_bout_min_s", s.regime.drive_bout_min_s);
      take(r, "drive_bout_mean_s", s.regime.drive_bout_mean_s);
      take(r, "charge_bout_min_s", s.regime.charge_bout_min_s);
      take(r, "charge_bout_mean_s", s.regime.charge_bout_mean_s);
      take(r, "level_min_s", s.regime.level_min_s);
      take(r, "level_mean_s", s.regime.level_mean_s);
      take(r, "short_rest_min_s", s.regime.short_rest_min_s);
      take(r, "short_rest_max_s", s.regime.short_rest_max_s);
      take(r, "long_rest_extra_max_s", s.regime.long_rest_extra_max_s);
    }
    if (doc.contains("correction")) take(doc.at("correction"), "min_rest_s", s.correction.min_rest_s);
    take(doc, "voltage_noise_v", s.voltage_noise_v);
    take(doc, "missing_channel_probability", s.missing_channel_probability);
    if (doc.contains("voltage_unit")) s.voltage_unit = core::unit_from_name(doc.at("voltage_unit").get<std::string>());
    if (doc.contains("current_unit")) s.current_unit = core::unit_from_name(doc.at("current_unit").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("fleet spec: ") + e.what());
  }
  s.validate();
  return s;
}

FleetSpec read_spec(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(textio::read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return spec_from_json(doc);
}

}  // namespace hystlab::synthdata

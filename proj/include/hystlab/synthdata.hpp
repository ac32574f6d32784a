#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hystlab/core.hpp"

namespace hystlab::synthdata {

// Monotone piecewise-linear SoC -> volts table.
struct OcvTable {
  std::vector<double> soc;  // strictly increasing, spans [0, 1]
  std::vector<double> volts;

  double operator()(double s) const;
};

struct Chemistry {
  OcvTable ocv_charge;
  OcvTable ocv_discharge;
  double gamma = 5.0;         // hysteresis rate
  double capacity_ah = 60.0;  // nominal capacity
  double resistance_ohm = 8e-4;

  void validate() const;
};

struct CurrentEnvelope {
  double drive_max_a = 250.0;  // peak discharge while driving
  double regen_max_a = 80.0;   // peak charge (regeneration) while driving
  double charge_min_a = 30.0;  // magnitude range of plug-in charging
  double charge_max_a = 90.0;
  double noise_a = 3.0;
};

struct TemperatureRange {
  double min_c = -18.3;
  double max_c = 48.9;
  double start_min_c = -5.0;
  double start_max_c = 35.0;
};

// Bout structure. After every rest the next bout is an activity with
// probability `drive_probability` (0 gives all-rest cycles); an activity is
// plug-in charging with probability `charge_fraction`, otherwise driving.
// Consecutive activity bouts continue with `continue_probability`; the rest
// that follows is long (and triggers a SoC correction) with
// `long_rest_probability`, otherwise short.
struct Regime {
  double drive_probability = 0.85;
  double charge_fraction = 0.25;
  double continue_probability = 0.5;
  double long_rest_probability = 0.6;
  double drive_bout_min_s = 180.0;
  double drive_bout_mean_s = 420.0;
  double charge_bout_min_s = 240.0;
  double charge_bout_mean_s = 480.0;
  double level_min_s = 10.0;
  double level_mean_s = 40.0;
  double short_rest_min_s = 10.0;
  double short_rest_max_s = 90.0;
  double long_rest_extra_max_s = 300.0;
};

// A SoC correction fires once per rest, `min_rest_s` into it.
struct CorrectionRule {
  double min_rest_s = 150.0;
};

struct FleetSpec {
  std::string fleet_id = "A";
  std::size_t n_cycles = 200;
  std::uint64_t seed = 1;
  double mean_cycle_hours = 30.4;
  double min_duration_fraction = 0.5;  // durations are shifted exponential, never below this fraction of the mean
  double native_rate_hz = 1.0;
  CurrentEnvelope current;
  TemperatureRange temperature;
  Chemistry chemistry;
  Regime regime;
  CorrectionRule correction;
  double voltage_noise_v = 2e-3;
  double missing_channel_probability = 0.03;
  core::UnitTag voltage_unit = core::UnitTag::V;
  core::UnitTag current_unit = core::UnitTag::A;

  void validate() const;
};

// Desk-scale presets for the two fleets: A is the large reference fleet, B a
// smaller fleet with a different chemistry, milder currents and mV voltage
// logging.
FleetSpec preset_fleet_a();
FleetSpec preset_fleet_b();

nlohmann::json spec_to_json(const FleetSpec& spec);
// Missing keys keep the defaults of `base`.
FleetSpec spec_from_json(const nlohmann::json& doc, const FleetSpec& base = FleetSpec{});
FleetSpec read_spec(const std::filesystem::path& path);

// One step of the one-state hysteresis recurrence. Current in A (negative
// charges), dt in seconds.
double hysteresis_step(double h, double current_a, double dt_s, double gamma, double capacity_ah);

struct OracleTrace {
  std::vector<double> h;                  // per step, h[0] = 0
  std::vector<double> correction_labels;  // h at each correction, in order
};

// Runs the recurrence over a cycle already on the 10 Hz grid.
OracleTrace label_oracle(const core::DrivingCycle& cycle_10hz, const Chemistry& chemistry);

struct GeneratedCycle {
  core::DrivingCycle cycle;  // in the units of the spec, some channels possibly dropped
  std::vector<double> labels;   // per correction ordinal
  double duration_hours = 0.0;
};

GeneratedCycle generate_cycle(const FleetSpec& spec, std::size_t index);

struct FleetSummary {
  std::size_t n_cycles = 0;
  std::size_t n_corrections = 0;
  double mean_duration_hours = 0.0;
};

// Writes cycle_XXXX.csv files, manifest.json, labels.csv
// (cycle_id,segment_index,label with segment_index = correction ordinal)
// and spec.json into `dir`.
FleetSummary generate_fleet(const FleetSpec& spec, const std::filesystem::path& dir, unsigned threads = 0);

// labels.csv reader: cycle_id -> labels by correction ordinal.
std::map<std::string, std::vector<double>> read_labels(const std::filesystem::path& path);

}  // namespace hystlab::synthdata

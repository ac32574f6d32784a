#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hystlab/harmonize.hpp"
#include "hystlab/parallel.hpp"
#include "hystlab/random.hpp"
#include "hystlab/synthdata.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::synthdata {

namespace {

using core::ChannelId;

enum class Bout { Rest, Drive, Charge };

struct BoutPlan {
  Bout kind = Bout::Rest;
  double duration_s = 0.0;
  bool long_rest = false;
};

// Walks the bout state machine on the native grid and fills current and
// correction flags.
class CurrentProgram {
 public:
  CurrentProgram(const FleetSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  void run(std::size_t n, double dt, std::vector<double>& current, std::vector<std::uint8_t>& flags,
           std::vector<double>& soc) {
    const auto& r = spec_.regime;
    current.assign(n, 0.0);
    flags.assign(n, 0);
    soc.assign(n, 0.0);
    double s = rng_.uniform(0.35, 0.9);
    BoutPlan bout{Bout::Rest, spec_.correction.min_rest_s + rng_.uniform(0.0, r.long_rest_extra_max_s), true};
    double elapsed = 0.0, level = 0.0, level_left = 0.0;
    bool fired = false;

    for (std::size_t j = 0; j < n; ++j) {
      while (elapsed >= bout.duration_s) {
        bout = next_bout(bout, s);
        elapsed = 0.0;
        level_left = 0.0;
        fired = false;
        if (bout.kind == Bout::Charge) level = -rng_.uniform(spec_.current.charge_min_a, spec_.current.charge_max_a);
      }
      double i = 0.0;
      switch (bout.kind) {
        case Bout::Rest:
          if (bout.long_rest && !fired && elapsed >= spec_.correction.min_rest_s) {
            flags[j] = 1;
            fired = true;
          }
          break;
        case Bout::Drive:
          if (level_left <= 0.0) {
            level = drive_level();
            level_left = r.level_min_s + rng_.exponential(r.level_mean_s - r.level_min_s);
          }
          i = level + spec_.current.noise_a * rng_.normal();
          level_left -= dt;
          break;
        case Bout::Charge:
          i = level + 0.05 * spec_.current.noise_a * rng_.normal();
          break;
      }
      current[j] = i;
      soc[j] = s;
      s = std::clamp(s - i * dt / 3600.0 / spec_.chemistry.capacity_ah, 0.01, 0.99);
      elapsed += dt;
    }
  }

 private:
  double drive_level() {
    const auto& c = spec_.current;
    if (rng_.bernoulli(0.2)) return -rng_.uniform(0.0, c.regen_max_a);
    return c.drive_max_a * std::pow(rng_.uniform(), 1.6);
  }

  BoutPlan next_bout(const BoutPlan& prev, double soc) {
    const auto& r = spec_.regime;
    const bool after_rest = prev.kind == Bout::Rest;
    bool activity = after_rest ? rng_.bernoulli(r.drive_probability) : rng_.bernoulli(r.continue_probability);
    if (!after_rest && !activity) {
      const bool long_rest = rng_.bernoulli(r.long_rest_probability);
      const double d = long_rest ? spec_.correction.min_rest_s + rng_.uniform(0.0, r.long_rest_extra_max_s)
                                 : rng_.uniform(r.short_rest_min_s, r.short_rest_max_s);
      return {Bout::Rest, d, long_rest};
    }
    if (!activity) return {Bout::Rest, spec_.correction.min_rest_s + rng_.uniform(0.0, r.long_rest_extra_max_s), true};
    bool charge = rng_.bernoulli(r.charge_fraction);
    if (soc < 0.25) charge = true;
    if (soc > 0.9) charge = false;
    if (charge) return {Bout::Charge, r.charge_bout_min_s + rng_.exponential(r.charge_bout_mean_s - r.charge_bout_min_s), false};
    return {Bout::Drive, r.drive_bout_min_s + rng_.exponential(r.drive_bout_mean_s - r.drive_bout_min_s), false};
  }

  const FleetSpec& spec_;
  Rng& rng_;
};

std::string cycle_name(const FleetSpec& spec, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%04zu", index);
  return spec.fleet_id + buf;
}

}  // namespace

GeneratedCycle generate_cycle(const FleetSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, index));
  const double hours = spec.mean_cycle_hours * (spec.min_duration_fraction +
                                                (1.0 - spec.min_duration_fraction) * rng.exponential(1.0));
  const double dt = 1.0 / spec.native_rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(hours * 3600.0 * spec.native_rate_hz)) + 1;

  GeneratedCycle out;
  auto& cycle = out.cycle;
  cycle.cycle_id = cycle_name(spec, index);
  cycle.native_rate_hz = spec.native_rate_hz;
  cycle.timestamps.resize(n);
  for (std::size_t j = 0; j < n; ++j) cycle.timestamps[j] = static_cast<double>(j) * dt;
  out.duration_hours = cycle.timestamps.back() / 3600.0;

  std::vector<double> current, soc;
  CurrentProgram(spec, rng).run(n, dt, current, cycle.soc_correction, soc);

  // Labels come from the current exactly as the pipeline will read it back.
  const double i_scale = spec.current_unit == core::UnitTag::mA ? 1000.0 : 1.0;
  std::vector<double> written_current(n);
  for (std::size_t j = 0; j < n; ++j) written_current[j] = current[j] * i_scale;
  if (spec.current_unit == core::UnitTag::mA)
    for (std::size_t j = 0; j < n; ++j) current[j] = written_current[j] * 1e-3;

  core::DrivingCycle probe;
  probe.cycle_id = cycle.cycle_id;
  probe.timestamps = cycle.timestamps;
  probe.soc_correction = cycle.soc_correction;
  probe.native_rate_hz = spec.native_rate_hz;
  probe.channels[core::index_of(ChannelId::BatteryCurrent)] = current;
  core::DrivingCycle fine = n >= 2 ? harmonize::resample_to_10hz(probe) : probe;
  const OracleTrace trace = label_oracle(fine, spec.chemistry);
  out.labels = trace.correction_labels;

  const auto& chem = spec.chemistry;
  std::vector<double> voltage(n), temperature(n);
  const double ambient = rng.uniform(spec.temperature.start_min_c, spec.temperature.start_max_c);
  double temp = ambient;
  for (std::size_t j = 0; j < n; ++j) {
    const auto step = std::min(fine.length() - 1,
                               static_cast<std::size_t>(std::llround(cycle.timestamps[j] * harmonize::kTargetRateHz)));
    const double h = trace.h[step];
    const double lo = chem.ocv_discharge(soc[j]), hi = chem.ocv_charge(soc[j]);
    voltage[j] = lo + 0.5 * (1.0 + h) * (hi - lo) - current[j] * chem.resistance_ohm +
                 spec.voltage_noise_v * rng.normal();
    temperature[j] = temp;
    temp += dt * (2e-5 * std::abs(current[j]) - 1e-4 * (temp - ambient)) + 0.01 * std::sqrt(dt) * rng.normal();
    temp = std::clamp(temp, spec.temperature.min_c, spec.temperature.max_c);
  }
  if (spec.voltage_unit == core::UnitTag::mV)
    for (auto& v : voltage) v *= 1000.0;

  cycle.channels[core::index_of(ChannelId::BatteryCurrent)] = std::move(written_current);
  cycle.channels[core::index_of(ChannelId::CellVoltage)] = std::move(voltage);
  cycle.channels[core::index_of(ChannelId::CellTemperature)] = std::move(temperature);
  if (rng.bernoulli(spec.missing_channel_probability))
    cycle.channels[core::index_of(rng.bernoulli(0.5) ? ChannelId::CellTemperature : ChannelId::CellVoltage)].reset();
  return out;
}

FleetSummary generate_fleet(const FleetSpec& spec, const std::filesystem::path& dir, unsigned threads) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorCode::Io, "cannot create output directory " + dir.string());

  std::vector<std::string> label_rows(spec.n_cycles);
  std::vector<double> hours(spec.n_cycles);
  std::vector<std::size_t> corrections(spec.n_cycles);
  core::FleetManifest manifest;
  manifest.fleet_id = spec.fleet_id;
  manifest.base_dir = dir;
  manifest.files.resize(spec.n_cycles);

  parallel_for(spec.n_cycles, threads == 0 ? core::worker_threads() : threads, [&](std::size_t i) {
    GeneratedCycle g = generate_cycle(spec, i);
    const std::string file = g.cycle.cycle_id + ".csv";
    core::write_cycle_csv(g.cycle, dir / file);
    core::ManifestEntry entry{file, {}};
    if (g.cycle.has(ChannelId::BatteryCurrent)) entry.units[ChannelId::BatteryCurrent] = spec.current_unit;
    if (g.cycle.has(ChannelId::CellVoltage)) entry.units[ChannelId::CellVoltage] = spec.voltage_unit;
    if (g.cycle.has(ChannelId::CellTemperature)) entry.units[ChannelId::CellTemperature] = core::UnitTag::degC;
    manifest.files[i] = std::move(entry);
    std::string rows;
    for (std::size_t k = 0; k < g.labels.size(); ++k)
      rows += g.cycle.cycle_id + "," + std::to_string(k) + "," + textio::format_double(g.labels[k]) + "\n";
    label_rows[i] = std::move(rows);
    hours[i] = g.duration_hours;
    corrections[i] = g.labels.size();
  });

  core::write_manifest(manifest, dir / "manifest.json");
  std::string labels = "cycle_id,segment_index,label\n";
  for (const auto& r : label_rows) labels += r;
  textio::write_file(dir / "labels.csv", labels);
  textio::write_file(dir / "spec.json", spec_to_json(spec).dump(2) + "\n");

  FleetSummary s;
  s.n_cycles = spec.n_cycles;
  for (std::size_t i = 0; i < spec.n_cycles; ++i) {
    s.mean_duration_hours += hours[i];
    s.n_corrections += corrections[i];
  }
  s.mean_duration_hours /= static_cast<double>(spec.n_cycles);
  return s;
}

std::map<std::string, std::vector<double>> read_labels(const std::filesystem::path& path) {
  const std::string text = textio::read_file(path);
  std::map<std::string, std::vector<double>> out;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no++ == 0) {
      require(line == "cycle_id,segment_index,label", ErrorCode::Parse, path.string() + ": bad labels header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = textio::split_fields(line);
    double idx = 0.0, label = 0.0;
    require(f.size() == 3 && textio::parse_double(f[1], idx) && textio::parse_double(f[2], label), ErrorCode::Parse,
            path.string() + ": bad row " + std::to_string(line_no));
    auto& v = out[std::string(f[0])];
    require(idx == static_cast<double>(v.size()), ErrorCode::Parse,
            path.string() + ": segment_index out of order at row " + std::to_string(line_no));
    v.push_back(label);
  }
  return out;
}

}  // namespace hystlab::synthdata

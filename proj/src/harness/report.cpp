#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hystlab/harness.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::harness {

namespace fs = std::filesystem;
using textio::format_double;

std::string report_csv(std::span<const ReportRow> rows) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : rows)
    out += r.dimred + "," + r.model + "," + r.size + "," + r.resample + "," + format_double(r.aql) + "," +
           format_double(r.rom_mb) + "," + format_double(r.ram_mb) + "\n";
  return out;
}

std::vector<ReportRow> read_report_csv(const fs::path& path) {
  std::istringstream in(textio::read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, path.string() + ": empty report");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kReportHeader, ErrorCode::Parse, path.string() + ": unexpected report header '" + line + "'");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = textio::split_fields(line);
    require(f.size() == 7, ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    ReportRow r;
    r.dimred = f[0];
    r.model = f[1];
    r.size = f[2];
    r.resample = f[3];
    require(textio::parse_double(f[4], r.aql) && textio::parse_double(f[5], r.rom_mb) &&
                textio::parse_double(f[6], r.ram_mb),
            ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": bad number");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string transfer_csv(std::span<const TransferRow> rows) {
  std::string out = "strategy,scaler,aql,change_pct,coverage_90,rom_mb,ram_mb,n_samples\n";
  for (const auto& r : rows)
    out += to_string(r.strategy) + "," + to_string(r.scaler) + "," + format_double(r.report.aql) + "," +
           format_double(r.change_pct) + "," + format_double(r.report.coverage_90) + "," +
           format_double(r.report.rom_mb) + "," + format_double(r.report.ram_mb) + "," +
           std::to_string(r.report.n_samples) + "\n";
  return out;
}

namespace {

std::string histogram(std::span<const double> values, double lo, double hi, std::size_t bins, const std::string& unit) {
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    counts[static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(bins) - 1))]++;
  }
  std::string out = "bin_lo" + unit + ",bin_hi" + unit + ",count\n";
  for (std::size_t i = 0; i < bins; ++i) {
    const double a = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    const double b = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(bins);
    out += format_double(a) + "," + format_double(b) + "," + std::to_string(counts[i]) + "\n";
  }
  return out;
}

}  // namespace

void write_fleet_plot_data(const FleetData& fleet, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<double> labels;
  for (const auto& s : fleet.segments) labels.push_back(s.label.value());
  textio::write_file(dir / "label_histogram.csv", histogram(labels, -1.0, 1.0, 20, ""));

  std::string cur = "cycle_id,min_current_a,max_current_a\n";
  std::string ocv = "cycle_id,voltage_v,temperature_c\n";
  std::vector<double> hours;
  for (const auto& c : fleet.cycles) {
    cur += c.cycle_id + "," + format_double(c.min_current_a) + "," + format_double(c.max_current_a) + "\n";
    for (const auto& [v, t] : c.rest_voltage_temperature)
      ocv += c.cycle_id + "," + format_double(v) + "," + format_double(t) + "\n";
    hours.push_back(c.duration_hours);
  }
  textio::write_file(dir / "current_range.csv", cur);
  textio::write_file(dir / "rest_voltage_temperature.csv", ocv);
  const double top = hours.empty() ? 1.0 : std::max(1e-9, *std::max_element(hours.begin(), hours.end()));
  textio::write_file(dir / "duration_histogram.csv", histogram(hours, 0.0, top, 20, "_h"));
}

void emit_report(const fs::path& in_dir, const fs::path& out_dir) {
  require(fs::is_directory(in_dir), ErrorCode::Io, "no run directory at " + in_dir.string());
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  for (const std::string level : {"sequence", "subsequence"}) {
    const auto src = in_dir / (level + "_level.csv");
    const auto rows = fs::exists(src) ? read_report_csv(src) : std::vector<ReportRow>{};
    textio::write_file(out_dir / (level + "_level.csv"), report_csv(rows));
    textio::write_file(out_dir / (level + "_best.csv"), report_csv(best_rows(rows)));
  }
  for (const char* extra : {"transfer.csv", "failures.csv", "audit.json"}) {
    if (!fs::exists(in_dir / extra) || fs::equivalent(in_dir, out_dir)) continue;
    textio::write_file(out_dir / extra, textio::read_file(in_dir / extra));
  }
  const auto plots = in_dir / "plots";
  if (fs::is_directory(plots) && !fs::equivalent(in_dir, out_dir)) {
    fs::create_directories(out_dir / "plots");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(plots))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) textio::write_file(out_dir / "plots" / f.filename(), textio::read_file(f));
  }
}

}  // namespace hystlab::harness

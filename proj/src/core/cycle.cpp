#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "hystlab/core.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::textio {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace hystlab::textio

namespace hystlab::core {

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames{
    "battery_current", "cell_voltage", "cell_temperature"};

}  // namespace

std::string_view channel_name(ChannelId id) { return kChannelNames[index_of(id)]; }

std::optional<ChannelId> channel_from_name(std::string_view name) {
  for (auto id : kAllChannels)
    if (kChannelNames[index_of(id)] == name) return id;
  return std::nullopt;
}

std::string_view unit_name(UnitTag unit) {
  switch (unit) {
    case UnitTag::V: return "V";
    case UnitTag::mV: return "mV";
    case UnitTag::A: return "A";
    case UnitTag::mA: return "mA";
    case UnitTag::degC: return "degC";
  }
  return "?";
}

UnitTag unit_from_name(std::string_view name) {
  if (name == "V") return UnitTag::V;
  if (name == "mV") return UnitTag::mV;
  if (name == "A") return UnitTag::A;
  if (name == "mA") return UnitTag::mA;
  if (name == "degC") return UnitTag::degC;
  fail(ErrorCode::Parse, "unknown unit tag '" + std::string(name) + "'");
}

const std::vector<double>& DrivingCycle::channel(ChannelId id) const {
  const auto& ch = channels[index_of(id)];
  require(ch.has_value(), ErrorCode::InvalidArgument,
          "cycle " + cycle_id + " has no " + std::string(channel_name(id)) + " channel");
  return *ch;
}

std::vector<double>& DrivingCycle::channel(ChannelId id) {
  auto& ch = channels[index_of(id)];
  require(ch.has_value(), ErrorCode::InvalidArgument,
          "cycle " + cycle_id + " has no " + std::string(channel_name(id)) + " channel");
  return *ch;
}

bool DrivingCycle::has_all_channels() const {
  return std::all_of(channels.begin(), channels.end(), [](const auto& c) { return c.has_value(); });
}

void DrivingCycle::validate() const {
  const std::size_t n = timestamps.size();
  require(n >= 1, ErrorCode::InvalidArgument, "cycle " + cycle_id + " is empty");
  require(soc_correction.size() == n, ErrorCode::InvalidArgument,
          "cycle " + cycle_id + ": soc_correction length mismatch");
  for (const auto& ch : channels)
    if (ch) require(ch->size() == n, ErrorCode::InvalidArgument, "cycle " + cycle_id + ": channel length mismatch");
  for (std::size_t i = 1; i < n; ++i)
    require(timestamps[i] > timestamps[i - 1], ErrorCode::InvalidArgument,
            "cycle " + cycle_id + ": timestamps not strictly increasing at row " + std::to_string(i));
  require(native_rate_hz > 0.0, ErrorCode::InvalidArgument, "native rate must be positive");
}

HysteresisLabel::HysteresisLabel(double value) : value_(value) {
  require(std::isfinite(value) && value >= -1.0 && value <= 1.0, ErrorCode::InvalidArgument,
          "hysteresis label outside [-1, 1]");
}

QuantileLevels::QuantileLevels(std::vector<double> levels) : levels_(std::move(levels)) {
  require(!levels_.empty(), ErrorCode::InvalidArgument, "at least one quantile level required");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    require(levels_[i] > 0.0 && levels_[i] < 1.0, ErrorCode::InvalidArgument,
            "quantile levels must lie in (0, 1)");
    if (i > 0)
      require(levels_[i] > levels_[i - 1], ErrorCode::InvalidArgument,
              "quantile levels must be strictly increasing");
  }
}

std::size_t QuantileLevels::median_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels_.size(); ++i)
    if (std::abs(levels_[i] - 0.5) < std::abs(levels_[best] - 0.5)) best = i;
  return best;
}

DrivingCycle read_cycle_csv(const std::filesystem::path& path, std::string cycle_id) {
  const std::string text = textio::read_file(path);
  std::string_view rest(text);

  auto next_line = [&rest](std::string_view& line) {
    if (rest.empty()) return false;
    const auto pos = rest.find('\n');
    line = rest.substr(0, pos);
    rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return true;
  };

  std::string_view line;
  require(next_line(line), ErrorCode::Parse, path.string() + ": empty file");
  const auto header = textio::split_fields(line);
  require(header.size() >= 2 && header.front() == "t_s" && header.back() == "soc_correction",
          ErrorCode::Parse, path.string() + ": header must start with t_s and end with soc_correction");

  // Channel columns must appear in canonical order, each at most once.
  std::vector<ChannelId> columns;
  for (std::size_t c = 1; c + 1 < header.size(); ++c) {
    auto id = channel_from_name(header[c]);
    require(id.has_value(), ErrorCode::Parse, path.string() + ": unknown column '" + std::string(header[c]) + "'");
    require(columns.empty() || index_of(*id) > index_of(columns.back()), ErrorCode::Parse,
            path.string() + ": channel columns out of order");
    columns.push_back(*id);
  }

  DrivingCycle cycle;
  cycle.cycle_id = std::move(cycle_id);
  for (auto id : columns) cycle.channels[index_of(id)].emplace();

  std::size_t row = 1;
  while (next_line(line)) {
    ++row;
    if (line.empty() && rest.empty()) break;
    const auto fields = textio::split_fields(line);
    require(fields.size() == header.size(), ErrorCode::Parse,
            path.string() + ": row " + std::to_string(row) + " has wrong field count");
    double t = 0.0;
    require(textio::parse_double(fields[0], t), ErrorCode::Parse,
            path.string() + ": bad timestamp at row " + std::to_string(row));
    cycle.timestamps.push_back(t);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      double v = 0.0;
      require(textio::parse_double(fields[c + 1], v) && std::isfinite(v), ErrorCode::Parse,
              path.string() + ": bad value at row " + std::to_string(row));
      cycle.channels[index_of(columns[c])]->push_back(v);
    }
    const auto flag = fields.back();
    require(flag == "0" || flag == "1", ErrorCode::Parse,
            path.string() + ": soc_correction must be 0 or 1 at row " + std::to_string(row));
    cycle.soc_correction.push_back(flag == "1" ? 1 : 0);
  }

  require(!cycle.timestamps.empty(), ErrorCode::Parse, path.string() + ": no data rows");
  if (cycle.timestamps.size() >= 2) {
    const double span = cycle.timestamps.back() - cycle.timestamps.front();
    if (span > 0.0) cycle.native_rate_hz = static_cast<double>(cycle.timestamps.size() - 1) / span;
  }
  for (std::size_t i = 1; i < cycle.timestamps.size(); ++i)
    require(cycle.timestamps[i] > cycle.timestamps[i - 1], ErrorCode::Parse,
            path.string() + ": timestamps not strictly increasing at row " + std::to_string(i + 2));
  return cycle;
}

void write_cycle_csv(const DrivingCycle& cycle, const std::filesystem::path& path) {
  cycle.validate();
  std::string out = "t_s";
  for (auto id : kAllChannels)
    if (cycle.has(id)) out += "," + std::string(channel_name(id));
  out += ",soc_correction\n";
  out.reserve(cycle.length() * 48);
  for (std::size_t i = 0; i < cycle.length(); ++i) {
    out += textio::format_double(cycle.timestamps[i]);
    for (auto id : kAllChannels) {
      if (!cycle.has(id)) continue;
      out += ',';
      out += textio::format_double(cycle.channel(id)[i]);
    }
    out += cycle.soc_correction[i] ? ",1\n" : ",0\n";
  }
  textio::write_file(path, out);
}

unsigned worker_threads() {
  if (const char* env = std::getenv("HYSTLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace hystlab::core

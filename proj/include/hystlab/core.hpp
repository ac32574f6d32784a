#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hystlab/error.hpp"

namespace hystlab::core {

// The three model input channels. Current sign: negative = charging,
// positive = discharging.
enum class ChannelId : std::uint8_t { BatteryCurrent = 0, CellVoltage = 1, CellTemperature = 2 };

inline constexpr std::size_t kChannelCount = 3;
inline constexpr std::array<ChannelId, kChannelCount> kAllChannels{
    ChannelId::BatteryCurrent, ChannelId::CellVoltage, ChannelId::CellTemperature};

std::string_view channel_name(ChannelId id);
std::optional<ChannelId> channel_from_name(std::string_view name);
constexpr std::size_t index_of(ChannelId id) { return static_cast<std::size_t>(id); }

enum class UnitTag : std::uint8_t { V, mV, A, mA, degC };

std::string_view unit_name(UnitTag unit);
UnitTag unit_from_name(std::string_view name);  // throws Parse on unknown tags

using UnitMap = std::map<ChannelId, UnitTag>;

// One recorded multichannel driving cycle. Channels may be missing before
// filtering.
struct DrivingCycle {
  std::string cycle_id;
  std::vector<double> timestamps;  // seconds since cycle start, strictly increasing
  std::array<std::optional<std::vector<double>>, kChannelCount> channels;
  std::vector<std::uint8_t> soc_correction;  // 1 at SoC-correction events
  double native_rate_hz = 1.0;

  std::size_t length() const noexcept { return timestamps.size(); }
  bool has(ChannelId id) const { return channels[index_of(id)].has_value(); }
  const std::vector<double>& channel(ChannelId id) const;
  std::vector<double>& channel(ChannelId id);
  bool has_all_channels() const;

  // Throws InvalidArgument when lengths disagree or timestamps are not
  // strictly increasing.
  void validate() const;

  bool operator==(const DrivingCycle&) const = default;
};

class HysteresisLabel {
 public:
  explicit HysteresisLabel(double value);
  double value() const noexcept { return value_; }
  bool operator==(const HysteresisLabel&) const = default;

 private:
  double value_;
};

class QuantileLevels {
 public:
  QuantileLevels() : levels_{0.05, 0.50, 0.95} {}
  explicit QuantileLevels(std::vector<double> levels);

  const std::vector<double>& levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  double operator[](std::size_t i) const { return levels_[i]; }
  // Index of the level closest to 0.5.
  std::size_t median_index() const;

  bool operator==(const QuantileLevels&) const = default;

 private:
  std::vector<double> levels_;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest directory, or absolute
  UnitMap units;
};

struct FleetManifest {
  std::string fleet_id;
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> files;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

FleetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const FleetManifest& manifest, const std::filesystem::path& path);

// Cycle CSV: header `t_s,battery_current,cell_voltage,cell_temperature,soc_correction`
// with absent channels omitted entirely.
DrivingCycle read_cycle_csv(const std::filesystem::path& path, std::string cycle_id);
void write_cycle_csv(const DrivingCycle& cycle, const std::filesystem::path& path);

struct FileError {
  std::string path;
  std::string message;
};

struct LoadedCycle {
  DrivingCycle cycle;
  UnitMap units;  // recorded, not yet applied
};

struct FleetLoad {
  std::string fleet_id;
  std::vector<LoadedCycle> cycles;  // manifest order, rejected files skipped
  std::vector<FileError> errors;
};

// Loads every manifest entry; a bad file is reported and skipped.
FleetLoad load_fleet(const FleetManifest& manifest, unsigned threads = 0);

struct DataSplit {
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
  std::vector<std::size_t> test_ids;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Seeded permutation, floor-based val/test counts, remainder to train.
DataSplit split_dataset(std::span<const std::size_t> sample_ids, SplitFractions fractions,
                        std::uint64_t seed);

// Same rule applied to groups (e.g. parent cycles); every sample follows its
// group. Proportions then hold at group level only.
DataSplit split_dataset_grouped(std::span<const std::size_t> sample_ids,
                                std::span<const std::size_t> group_of_sample,
                                SplitFractions fractions, std::uint64_t seed);

// Worker count from HYSTLAB_THREADS, falling back to hardware concurrency.
unsigned worker_threads();

}  // namespace hystlab::core

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hystlab/core.hpp"
#include "hystlab/matrix.hpp"

namespace hystlab::harmonize {

using core::ChannelId;
using core::DrivingCycle;
using core::HysteresisLabel;

inline constexpr double kTargetRateHz = 10.0;

// Scales every present channel to V / A / degC. Pure multiplication by 1 or 1e-3.
DrivingCycle standardize_units(const DrivingCycle& cycle, const core::UnitMap& units);

// Keeps cycles carrying all three channels, order preserved.
std::vector<DrivingCycle> filter_cycles(std::vector<DrivingCycle> cycles);

// Linear interpolation onto t0 + k/10 s. Each correction event lands on the
// nearest output step; collisions shift to the next free step.
DrivingCycle resample_to_10hz(const DrivingCycle& cycle);

struct SegmentationPolicy {
  double relax_current_threshold_a = 0.05;
  double relax_min_duration_s = 600.0;
  static constexpr double min_segment_duration_s = 10.0;

  std::size_t min_segment_steps() const {
    return static_cast<std::size_t>(min_segment_duration_s * kTargetRateHz);
  }
};

struct Segment {
  std::string parent_cycle_id;
  std::array<std::vector<double>, core::kChannelCount> channels;
  HysteresisLabel label{0.0};
  std::size_t start_step = 0;          // first step in the 10 Hz parent cycle
  std::size_t closing_correction = 0;  // ordinal of the correction that closed it

  std::size_t length() const noexcept { return channels[0].size(); }
  const std::vector<double>& channel(ChannelId id) const { return channels[core::index_of(id)]; }
};

// Label for the k-th SoC correction of a cycle, if known.
using LabelSource = std::function<std::optional<double>(std::size_t correction_ordinal)>;

// Segment opens right after a correction that follows a relaxation phase and
// closes at the next correction (inclusive). Short, all-zero-current and
// unclosed candidates are dropped.
std::vector<Segment> segment_cycle(const DrivingCycle& cycle, const SegmentationPolicy& policy,
                                   const LabelSource& labels);

// Window length for truncation; nullopt means "All".
using WindowLength = std::optional<std::size_t>;
inline constexpr WindowLength kAll = std::nullopt;

std::vector<Segment> truncate_last(std::span<const Segment> segments, WindowLength length);

// Consecutive non-overlapping windows of `length` steps from the start of the
// segment; a trailing partial window is dropped.
std::vector<Segment> split_subsequences(const Segment& segment, std::size_t length);

// ---- statistical features ----------------------------------------------------

inline constexpr std::size_t kStatCount = 19;
inline constexpr std::size_t kStatFeatureCount = kStatCount * core::kChannelCount;

const std::array<std::string, kStatCount>& statistic_names();

// The 19 statistics of one window, in table order. Requires length >= 2.
std::array<double, kStatCount> compute_statistics(std::span<const double> x);

struct StatMatrix {
  Matrix values;  // N x 57
  std::vector<std::string> feature_names;
};

std::vector<std::string> stat_feature_names();
StatMatrix extract_stat_features(std::span<const Segment> segments);

// ---- fixed-length tensors -----------------------------------------------------

struct SeqTensor {
  std::size_t n = 0;
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<double> values;  // (n, steps, features) row-major

  SeqTensor() = default;
  SeqTensor(std::size_t n_, std::size_t steps_, std::size_t features_)
      : n(n_), steps(steps_), features(features_), values(n_ * steps_ * features_, 0.0) {}

  double& at(std::size_t i, std::size_t t, std::size_t f) { return values[(i * steps + t) * features + f]; }
  double at(std::size_t i, std::size_t t, std::size_t f) const { return values[(i * steps + t) * features + f]; }
  std::span<const double> sample(std::size_t i) const { return {values.data() + i * steps * features, steps * features}; }
  std::span<double> sample(std::size_t i) { return {values.data() + i * steps * features, steps * features}; }

  SeqTensor select(std::span<const std::size_t> idx) const;
  bool operator==(const SeqTensor&) const = default;
};

// Samples `steps` evenly spaced points over [first, last] of each segment.
SeqTensor resample_fixed_T(std::span<const Segment> segments, std::size_t steps);
std::vector<double> resample_series(std::span<const double> x, std::size_t steps);

// ---- min-max scaling ----------------------------------------------------------

struct MinMaxScalerParams {
  std::vector<double> min;
  std::vector<double> max;
  std::string fitted_on;
};

MinMaxScalerParams fit_minmax(const Matrix& data, std::span<const std::size_t> rows);
MinMaxScalerParams fit_minmax(const SeqTensor& data, std::span<const std::size_t> rows);

// (x - min) / (max - min), 0 for degenerate features, never clamped.
Matrix apply_minmax(const Matrix& data, const MinMaxScalerParams& params);
SeqTensor apply_minmax(const SeqTensor& data, const MinMaxScalerParams& params);

// ---- artifacts ------------------------------------------------------------------

void write_stat_matrix_csv(const StatMatrix& m, const std::filesystem::path& path);
StatMatrix read_stat_matrix_csv(const std::filesystem::path& path);

// Flat little-endian float64 blob in (N, T, F) order plus a JSON sidecar
// {N, T, F, feature_order}.
void write_seq_tensor(const SeqTensor& t, const std::filesystem::path& bin_path,
                      const std::filesystem::path& json_path);
SeqTensor read_seq_tensor(const std::filesystem::path& bin_path, const std::filesystem::path& json_path);

nlohmann::json scaler_to_json(const MinMaxScalerParams& p);
MinMaxScalerParams scaler_from_json(const nlohmann::json& doc);

}  // namespace hystlab::harmonize

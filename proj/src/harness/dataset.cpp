#include <algorithm>
#include <cmath>

#include "hystlab/harness.hpp"
#include "hystlab/parallel.hpp"

namespace hystlab::harness {

namespace {

struct CycleResult {
  std::optional<CycleSummary> summary;
  std::vector<Segment> segments;
  std::optional<core::FileError> error;
  bool filtered = false;
};

}  // namespace

FleetData harmonize_fleet(const std::filesystem::path& manifest_or_dir, const SegmentationPolicy& policy,
                          unsigned threads) {
  const auto manifest_path = std::filesystem::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.json"
                                                                            : manifest_or_dir;
  const auto manifest = core::read_manifest(manifest_path);
  const auto labels_path = manifest.base_dir / "labels.csv";
  require(std::filesystem::exists(labels_path), ErrorCode::Io, "no labels.csv next to " + manifest_path.string());
  const auto labels = synthdata::read_labels(labels_path);
  if (threads == 0) threads = core::worker_threads();

  auto loaded = core::load_fleet(manifest, threads);
  std::vector<CycleResult> results(loaded.cycles.size());
  parallel_for(loaded.cycles.size(), threads, [&](std::size_t i) {
    auto& lc = loaded.cycles[i];
    auto& res = results[i];
    const std::string id = lc.cycle.cycle_id;
    try {
      core::DrivingCycle cycle = harmonize::standardize_units(lc.cycle, lc.units);
      lc.cycle = core::DrivingCycle{};  // release the raw copy early
      if (!cycle.has_all_channels()) {
        res.filtered = true;
        return;
      }
      CycleSummary s;
      s.cycle_id = cycle.cycle_id;
      s.duration_hours = (cycle.timestamps.back() - cycle.timestamps.front()) / 3600.0;
      const auto& cur = cycle.channel(core::ChannelId::BatteryCurrent);
      const auto [lo, hi] = std::minmax_element(cur.begin(), cur.end());
      s.min_current_a = *lo;
      s.max_current_a = *hi;
      const auto& volt = cycle.channel(core::ChannelId::CellVoltage);
      const auto& temp = cycle.channel(core::ChannelId::CellTemperature);
      for (std::size_t k = 0; k < cycle.length(); ++k)
        if (cycle.soc_correction[k]) s.rest_voltage_temperature.emplace_back(volt[k], temp[k]);

      const auto fine = harmonize::resample_to_10hz(cycle);
      const auto it = labels.find(cycle.cycle_id);
      const std::vector<double>* cycle_labels = it == labels.end() ? nullptr : &it->second;
      res.segments = harmonize::segment_cycle(fine, policy, [cycle_labels](std::size_t k) -> std::optional<double> {
        if (!cycle_labels || k >= cycle_labels->size()) return std::nullopt;
        return (*cycle_labels)[k];
      });
      res.summary = std::move(s);
    } catch (const Error& e) {
      res.error = core::FileError{id, e.what()};
    }
  });

  FleetData out;
  out.fleet_id = manifest.fleet_id;
  out.errors = std::move(loaded.errors);
  for (auto& r : results) {
    if (r.filtered) ++out.cycles_filtered;
    if (r.error) out.errors.push_back(std::move(*r.error));
    if (r.summary) out.cycles.push_back(std::move(*r.summary));
    for (auto& s : r.segments) out.segments.push_back(std::move(s));
  }
  return out;
}

namespace {

SampleSet base_samples(const FleetData& fleet) {
  SampleSet s;
  for (std::size_t i = 0; i < fleet.segments.size(); ++i) {
    s.labels.push_back(fleet.segments[i].label.value());
    s.parent.push_back(i);
    s.position.push_back(0);
  }
  return s;
}

}  // namespace

SampleSet sequence_stats(const FleetData& fleet, WindowLength length) {
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet " + fleet.fleet_id + " has no segments");
  SampleSet s = base_samples(fleet);
  s.kind = FeatureKind::Stats;
  auto feats = harmonize::extract_stat_features(harmonize::truncate_last(fleet.segments, length));
  s.stats = std::move(feats.values);
  s.feature_names = std::move(feats.feature_names);
  return s;
}

SampleSet sequence_tensor(const FleetData& fleet, WindowLength length, std::size_t steps) {
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet " + fleet.fleet_id + " has no segments");
  SampleSet s = base_samples(fleet);
  s.kind = FeatureKind::Tensor;
  s.tensor = harmonize::resample_fixed_T(harmonize::truncate_last(fleet.segments, length), steps);
  return s;
}

SampleSet subsequence_tensor(const FleetData& fleet, std::size_t length, std::size_t steps) {
  SampleSet s;
  s.kind = FeatureKind::Tensor;
  std::vector<SeqTensor> parts;
  std::size_t total = 0;
  for (std::size_t i = 0; i < fleet.segments.size(); ++i) {
    const auto subs = harmonize::split_subsequences(fleet.segments[i], length);
    if (subs.empty()) continue;
    for (std::size_t k = 0; k < subs.size(); ++k) {
      s.labels.push_back(subs[k].label.value());
      s.parent.push_back(i);
      s.position.push_back(k);
    }
    parts.push_back(harmonize::resample_fixed_T(subs, steps));
    total += subs.size();
  }
  require(total > 0, ErrorCode::NoSamples,
          "no segment of fleet " + fleet.fleet_id + " is at least " + std::to_string(length) + " steps long");
  s.tensor = SeqTensor(total, steps, core::kChannelCount);
  auto out = s.tensor.values.begin();
  for (const auto& p : parts) out = std::copy(p.values.begin(), p.values.end(), out);
  return s;
}

SampleSet concat(const SampleSet& a, const SampleSet& b) {
  if (b.size() == 0) return a;
  if (a.size() == 0) return b;
  require(a.kind == b.kind, ErrorCode::InvalidArgument, "cannot concatenate different feature kinds");
  SampleSet s = a;
  const std::size_t parent_offset = a.parent.empty() ? 0 : *std::max_element(a.parent.begin(), a.parent.end()) + 1;
  s.labels.insert(s.labels.end(), b.labels.begin(), b.labels.end());
  for (auto p : b.parent) s.parent.push_back(p + parent_offset);
  s.position.insert(s.position.end(), b.position.begin(), b.position.end());
  if (a.kind == FeatureKind::Stats) {
    require(a.stats.cols() == b.stats.cols(), ErrorCode::DimensionMismatch, "feature width mismatch");
    std::vector<double> data = a.stats.data();
    data.insert(data.end(), b.stats.data().begin(), b.stats.data().end());
    s.stats = Matrix(a.stats.rows() + b.stats.rows(), a.stats.cols(), std::move(data));
  } else {
    require(a.tensor.steps == b.tensor.steps && a.tensor.features == b.tensor.features, ErrorCode::DimensionMismatch,
            "tensor shape mismatch");
    s.tensor.n += b.tensor.n;
    s.tensor.values.insert(s.tensor.values.end(), b.tensor.values.begin(), b.tensor.values.end());
  }
  return s;
}

core::DataSplit split_samples(const SampleSet& s, std::uint64_t seed) {
  std::vector<std::size_t> ids(s.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return core::split_dataset_grouped(ids, s.parent, core::SplitFractions{}, seed);
}

}  // namespace hystlab::harness

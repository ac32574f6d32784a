#include <algorithm>
#include <cmath>

#include "hystlab/harmonize.hpp"

namespace hystlab::harmonize {

namespace {

constexpr double kKnotTolerance = 1e-9;

}  // namespace

DrivingCycle resample_to_10hz(const DrivingCycle& cycle) {
  cycle.validate();
  const auto& ts = cycle.timestamps;
  require(ts.size() >= 2, ErrorCode::InvalidArgument,
          "cycle " + cycle.cycle_id + ": resampling needs at least two timestamps");

  const double t0 = ts.front();
  const auto n_out =
      static_cast<std::size_t>(std::floor((ts.back() - t0) * kTargetRateHz + kKnotTolerance)) + 1;

  DrivingCycle out;
  out.cycle_id = cycle.cycle_id;
  out.native_rate_hz = kTargetRateHz;
  out.timestamps.resize(n_out);
  out.soc_correction.assign(n_out, 0);
  for (auto id : core::kAllChannels)
    if (cycle.has(id)) out.channels[core::index_of(id)].emplace(n_out, 0.0);

  std::size_t j = 0;
  for (std::size_t k = 0; k < n_out; ++k) {
    const double t = t0 + static_cast<double>(k) / kTargetRateHz;
    out.timestamps[k] = t;
    while (j + 2 < ts.size() && ts[j + 1] <= t) ++j;
    // Exact knots reproduce the input value bit for bit.
    std::size_t knot = ts.size();
    if (std::abs(t - ts[j]) <= kKnotTolerance) knot = j;
    else if (std::abs(t - ts[j + 1]) <= kKnotTolerance) knot = j + 1;
    const double w = knot < ts.size() ? 0.0 : std::clamp((t - ts[j]) / (ts[j + 1] - ts[j]), 0.0, 1.0);
    for (auto id : core::kAllChannels) {
      if (!cycle.has(id)) continue;
      const auto& src = cycle.channel(id);
      out.channel(id)[k] = knot < ts.size() ? src[knot] : src[j] + w * (src[j + 1] - src[j]);
    }
  }

  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!cycle.soc_correction[i]) continue;
    auto step = static_cast<long long>(std::llround((ts[i] - t0) * kTargetRateHz));
    step = std::clamp<long long>(step, 0, static_cast<long long>(n_out) - 1);
    auto s = static_cast<std::size_t>(step);
    std::size_t target = n_out;
    for (std::size_t f = s; f < n_out; ++f)
      if (!out.soc_correction[f]) { target = f; break; }
    if (target == n_out)
      for (std::size_t b = s; b-- > 0;)
        if (!out.soc_correction[b]) { target = b; break; }
    require(target < n_out, ErrorCode::InvalidArgument,
            "cycle " + cycle.cycle_id + ": more correction events than output steps");
    out.soc_correction[target] = 1;
  }
  return out;
}

std::vector<Segment> truncate_last(std::span<const Segment> segments, WindowLength length) {
  std::vector<Segment> out(segments.begin(), segments.end());
  if (!length) return out;
  require(*length > 0, ErrorCode::InvalidArgument, "truncation length must be positive");
  for (auto& seg : out) {
    const std::size_t n = seg.length();
    if (n <= *length) continue;
    const std::size_t drop = n - *length;
    for (auto& ch : seg.channels) ch.erase(ch.begin(), ch.begin() + static_cast<std::ptrdiff_t>(drop));
    seg.start_step += drop;
  }
  return out;
}

std::vector<Segment> split_subsequences(const Segment& segment, std::size_t length) {
  require(length > 0, ErrorCode::InvalidArgument, "subsequence length must be positive");
  std::vector<Segment> out;
  const std::size_t count = segment.length() / length;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Segment sub;
    sub.parent_cycle_id = segment.parent_cycle_id;
    sub.label = segment.label;
    sub.start_step = segment.start_step + k * length;
    sub.closing_correction = segment.closing_correction;
    for (std::size_t c = 0; c < core::kChannelCount; ++c) {
      const auto first = segment.channels[c].begin() + static_cast<std::ptrdiff_t>(k * length);
      sub.channels[c].assign(first, first + static_cast<std::ptrdiff_t>(length));
    }
    out.push_back(std::move(sub));
  }
  return out;
}

std::vector<double> resample_series(std::span<const double> x, std::size_t steps) {
  require(steps >= 2, ErrorCode::InvalidArgument, "fixed resampling needs T >= 2");
  require(x.size() >= 2, ErrorCode::InvalidArgument, "fixed resampling needs segments of length >= 2");
  std::vector<double> out(steps);
  const double last = static_cast<double>(x.size() - 1);
  for (std::size_t k = 0; k < steps; ++k) {
    if (k == 0) { out[k] = x.front(); continue; }
    if (k + 1 == steps) { out[k] = x.back(); continue; }
    const double pos = last * static_cast<double>(k) / static_cast<double>(steps - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(lo);
    out[k] = (w == 0.0 || lo + 1 >= x.size()) ? x[lo] : x[lo] + w * (x[lo + 1] - x[lo]);
  }
  return out;
}

SeqTensor resample_fixed_T(std::span<const Segment> segments, std::size_t steps) {
  require(steps >= 2, ErrorCode::InvalidArgument, "fixed resampling needs T >= 2");
  SeqTensor out(segments.size(), steps, core::kChannelCount);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t c = 0; c < core::kChannelCount; ++c) {
      const auto r = resample_series(segments[i].channels[c], steps);
      for (std::size_t t = 0; t < steps; ++t) out.at(i, t, c) = r[t];
    }
  }
  return out;
}

SeqTensor SeqTensor::select(std::span<const std::size_t> idx) const {
  SeqTensor out(idx.size(), steps, features);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < n, ErrorCode::InvalidArgument, "tensor sample index out of range");
    auto src = sample(idx[i]);
    std::copy(src.begin(), src.end(), out.sample(i).begin());
  }
  return out;
}

}  // namespace hystlab::harmonize

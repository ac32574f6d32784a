#include <algorithm>
#include <cmath>

#include "hystlab/harmonize.hpp"

namespace hystlab::harmonize {

std::vector<Segment> segment_cycle(const DrivingCycle& cycle, const SegmentationPolicy& policy,
                                   const LabelSource& labels) {
  cycle.validate();
  require(cycle.has_all_channels(), ErrorCode::InvalidArgument,
          "cycle " + cycle.cycle_id + ": segmentation requires all three channels");
  require(policy.relax_current_threshold_a >= 0.0 && policy.relax_min_duration_s > 0.0,
          ErrorCode::InvalidArgument, "invalid segmentation policy");

  const auto& current = cycle.channel(ChannelId::BatteryCurrent);
  const std::size_t n = cycle.length();
  const auto relax_steps =
      static_cast<std::size_t>(std::ceil(policy.relax_min_duration_s * kTargetRateHz - 1e-9));

  std::vector<Segment> out;
  constexpr std::size_t kClosed = static_cast<std::size_t>(-1);
  std::size_t open = kClosed;
  std::size_t rest_run = 0;  // consecutive rest steps ending at the current index
  std::size_t ordinal = 0;

  for (std::size_t i = 0; i < n; ++i) {
    rest_run = std::abs(current[i]) < policy.relax_current_threshold_a ? rest_run + 1 : 0;
    if (!cycle.soc_correction[i]) continue;

    if (open != kClosed) {
      const std::size_t first = open;
      const std::size_t len = i + 1 - first;
      const bool moving = std::any_of(current.begin() + static_cast<std::ptrdiff_t>(first),
                                      current.begin() + static_cast<std::ptrdiff_t>(i + 1),
                                      [](double v) { return v != 0.0; });
      const auto label = labels ? labels(ordinal) : std::nullopt;
      if (label && moving && len >= policy.min_segment_steps()) {
        Segment seg;
        seg.parent_cycle_id = cycle.cycle_id;
        seg.label = HysteresisLabel(*label);
        seg.start_step = first;
        seg.closing_correction = ordinal;
        for (auto id : core::kAllChannels) {
          const auto& src = cycle.channel(id);
          seg.channels[core::index_of(id)].assign(src.begin() + static_cast<std::ptrdiff_t>(first),
                                                  src.begin() + static_cast<std::ptrdiff_t>(i + 1));
        }
        out.push_back(std::move(seg));
      }
      open = kClosed;
    }
    if (rest_run >= relax_steps && i + 1 < n) open = i + 1;
    ++ordinal;
  }
  return out;
}

}  // namespace hystlab::harmonize

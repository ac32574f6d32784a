#include <algorithm>
#include <cmath>
#include <limits>

#include "hystlab/harmonize.hpp"

namespace hystlab::harmonize {

const std::array<std::string, kStatCount>& statistic_names() {
  static const std::array<std::string, kStatCount> names{
      "minimum",
      "maximum",
      "absolute_minimum",
      "absolute_maximum",
      "sum_of_absolute_changes",
      "mean_of_changes",
      "mean_of_absolute_changes",
      "absolute_energy",
      "sum_of_values",
      "mean",
      "complexity",
      "sum_of_positive_values",
      "sum_of_negative_values",
      "mean_of_positive_values",
      "mean_of_negative_values",
      "number_of_zeros",
      "root_mean_square",
      "first_value",
      "last_value",
  };
  return names;
}

std::vector<std::string> stat_feature_names() {
  std::vector<std::string> names;
  names.reserve(kStatFeatureCount);
  for (auto id : core::kAllChannels)
    for (const auto& stat : statistic_names()) names.push_back(std::string(core::channel_name(id)) + "__" + stat);
  return names;
}

// Means divide by the number of contributing elements (n, or n-1 for
// differences); empty positive/negative subsets give 0. Complexity uses squared
// successive differences.
std::array<double, kStatCount> compute_statistics(std::span<const double> x) {
  const std::size_t n = x.size();
  require(n >= 2, ErrorCode::InvalidArgument, "statistical features need at least two steps");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double abs_lo = lo;
  double abs_hi = 0.0;
  double energy = 0.0, sum = 0.0, pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0, zeros = 0;
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    abs_lo = std::min(abs_lo, std::abs(v));
    abs_hi = std::max(abs_hi, std::abs(v));
    energy += v * v;
    sum += v;
    if (v > 0.0) { pos_sum += v; ++pos_n; }
    else if (v < 0.0) { neg_sum += v; ++neg_n; }
    else ++zeros;
  }

  double abs_changes = 0.0, changes = 0.0, sq_changes = 0.0;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    const double d = x[l + 1] - x[l];
    abs_changes += std::abs(d);
    changes += d;
    sq_changes += d * d;
  }

  const auto nd = static_cast<double>(n);
  const auto nd1 = static_cast<double>(n - 1);
  return {
      lo,
      hi,
      abs_lo,
      abs_hi,
      abs_changes,
      changes / nd1,
      abs_changes / nd1,
      energy,
      sum,
      sum / nd,
      std::sqrt(sq_changes),
      pos_sum,
      neg_sum,
      pos_n ? pos_sum / static_cast<double>(pos_n) : 0.0,
      neg_n ? neg_sum / static_cast<double>(neg_n) : 0.0,
      static_cast<double>(zeros),
      std::sqrt(energy / nd),
      x.front(),
      x.back(),
  };
}

StatMatrix extract_stat_features(std::span<const Segment> segments) {
  StatMatrix out{Matrix(segments.size(), kStatFeatureCount), stat_feature_names()};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    auto row = out.values.row(i);
    for (std::size_t c = 0; c < core::kChannelCount; ++c) {
      const auto stats = compute_statistics(segments[i].channels[c]);
      std::copy(stats.begin(), stats.end(), row.begin() + static_cast<std::ptrdiff_t>(c * kStatCount));
    }
  }
  return out;
}

}  // namespace hystlab::harmonize

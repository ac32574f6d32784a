#include <algorithm>
#include <cmath>
#include <map>

#include "hystlab/core.hpp"
#include "hystlab/random.hpp"

namespace hystlab::core {

namespace {

struct Counts {
  std::size_t train, val, test;
};

Counts floor_counts(std::size_t n, SplitFractions f) {
  require(f.train >= 0 && f.val >= 0 && f.test >= 0 && std::abs(f.train + f.val + f.test - 1.0) < 1e-9,
          ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
  // Small epsilon so that e.g. 10 * 0.1 does not floor to 0 through rounding.
  const auto nv = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.val + 1e-9));
  const auto nt = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.test + 1e-9));
  return {n - nv - nt, nv, nt};
}

}  // namespace

DataSplit split_dataset(std::span<const std::size_t> sample_ids, SplitFractions fractions,
                        std::uint64_t seed) {
  require(sample_ids.size() >= 10, ErrorCode::InvalidArgument,
          "split needs at least 10 samples, got " + std::to_string(sample_ids.size()));
  std::vector<std::size_t> perm(sample_ids.begin(), sample_ids.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  const auto c = floor_counts(perm.size(), fractions);

  DataSplit split;
  split.seed = seed;
  split.train_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(c.train));
  split.val_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(c.train),
                       perm.begin() + static_cast<std::ptrdiff_t>(c.train + c.val));
  split.test_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(c.train + c.val), perm.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

DataSplit split_dataset_grouped(std::span<const std::size_t> sample_ids,
                                std::span<const std::size_t> group_of_sample,
                                SplitFractions fractions, std::uint64_t seed) {
  require(sample_ids.size() == group_of_sample.size(), ErrorCode::DimensionMismatch,
          "one group per sample required");
  std::vector<std::size_t> groups(group_of_sample.begin(), group_of_sample.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  const DataSplit g = split_dataset(groups, fractions, seed);

  std::map<std::size_t, int> part;
  for (auto id : g.train_ids) part[id] = 0;
  for (auto id : g.val_ids) part[id] = 1;
  for (auto id : g.test_ids) part[id] = 2;

  DataSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    switch (part.at(group_of_sample[i])) {
      case 0: split.train_ids.push_back(sample_ids[i]); break;
      case 1: split.val_ids.push_back(sample_ids[i]); break;
      default: split.test_ids.push_back(sample_ids[i]); break;
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

}  // namespace hystlab::core

#pragma once

#include <vector>

#include "hystlab/models.hpp"

namespace hystlab::models::detail {

struct LayerOffsets {
  std::size_t in = 0;
  std::size_t wz = 0, wr = 0, wh = 0, uz = 0, ur = 0, uh = 0, bz = 0, br = 0, bh = 0, end = 0;
};

LayerOffsets layer_offsets(std::size_t input_dim, std::size_t hidden, std::size_t layer);
std::size_t head_offset(const QgruModel& m);

// Per-step activations of one layer for a batch.
struct LayerCache {
  std::vector<RowMat> h;  // steps + 1 entries, h[0] = 0
  std::vector<RowMat> z, r, hc;
};

// Gathers step t of the given rows into a (rows x features) matrix.
std::vector<RowMat> batch_inputs(const SeqTensor& x, std::span<const std::size_t> rows);

// Runs all layers; returns the top-layer final state (batch x H). Fills
// `caches` (one per layer) when non-null.
RowMat forward_batch(const QgruModel& m, const std::vector<RowMat>& inputs, std::vector<LayerCache>* caches);

RowMat heads(const QgruModel& m, const RowMat& h_final);

}  // namespace hystlab::models::detail

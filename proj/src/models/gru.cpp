#include <cmath>
#include <map>

#include "gru_internal.hpp"
#include "hystlab/random.hpp"

namespace hystlab::models {

namespace detail {

LayerOffsets layer_offsets(std::size_t input_dim, std::size_t hidden, std::size_t layer) {
  std::size_t base = 0;
  LayerOffsets o;
  for (std::size_t l = 0; l <= layer; ++l) {
    o.in = l == 0 ? input_dim : hidden;
    const std::size_t wsz = o.in * hidden, usz = hidden * hidden;
    o.wz = base;
    o.wr = o.wz + wsz;
    o.wh = o.wr + wsz;
    o.uz = o.wh + wsz;
    o.ur = o.uz + usz;
    o.uh = o.ur + usz;
    o.bz = o.uh + usz;
    o.br = o.bz + hidden;
    o.bh = o.br + hidden;
    o.end = o.bh + hidden;
    base = o.end;
  }
  return o;
}

std::size_t head_offset(const QgruModel& m) { return layer_offsets(m.input_dim, m.hidden, m.layers - 1).end; }

std::vector<RowMat> batch_inputs(const SeqTensor& x, std::span<const std::size_t> rows) {
  std::vector<RowMat> out(x.steps, RowMat(rows.size(), x.features));
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto s = x.sample(rows[b]);
    for (std::size_t t = 0; t < x.steps; ++t)
      for (std::size_t f = 0; f < x.features; ++f) out[t](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f)) = s[t * x.features + f];
  }
  return out;
}

namespace {

RowMat sigmoid(const RowMat& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

RowMat forward_batch(const QgruModel& m, const std::vector<RowMat>& inputs, std::vector<LayerCache>* caches) {
  const auto steps = inputs.size();
  const auto batch = inputs.empty() ? 0 : inputs[0].rows();
  const auto H = static_cast<Eigen::Index>(m.hidden);
  if (caches) caches->assign(m.layers, LayerCache{});

  const std::vector<RowMat>* in = &inputs;
  std::vector<RowMat> below;
  RowMat h = RowMat::Zero(batch, H);
  for (std::size_t l = 0; l < m.layers; ++l) {
    const auto v = layer_view(m, l);
    std::vector<RowMat> out;
    if (l + 1 < m.layers) out.reserve(steps);
    h = RowMat::Zero(batch, H);
    LayerCache* c = caches ? &(*caches)[l] : nullptr;
    if (c) {
      c->h.reserve(steps + 1);
      c->z.reserve(steps);
      c->r.reserve(steps);
      c->hc.reserve(steps);
      c->h.push_back(h);
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const RowMat& xt = (*in)[t];
      RowMat z = sigmoid((xt * v.wz + h * v.uz).rowwise() + v.bz);
      RowMat r = sigmoid((xt * v.wr + h * v.ur).rowwise() + v.br);
      RowMat hc = ((xt * v.wh + r.cwiseProduct(h) * v.uh).rowwise() + v.bh).array().tanh().matrix();
      RowMat hn = h + z.cwiseProduct(hc - h);
      if (c) {
        c->z.push_back(std::move(z));
        c->r.push_back(std::move(r));
        c->hc.push_back(std::move(hc));
        c->h.push_back(hn);
      }
      h = std::move(hn);
      if (l + 1 < m.layers) out.push_back(h);
    }
    below = std::move(out);
    in = &below;
  }
  return h;
}

RowMat heads(const QgruModel& m, const RowMat& h_final) {
  const auto H = static_cast<Eigen::Index>(m.hidden);
  const auto Q = static_cast<Eigen::Index>(m.quantiles.size());
  RowMat out(h_final.rows(), Q);
  const double* p = m.params.data() + head_offset(m);
  for (Eigen::Index q = 0; q < Q; ++q) {
    Eigen::Map<const Eigen::VectorXd> w(p + q * (H + 1), H);
    out.col(q) = (h_final * w).array() + p[q * (H + 1) + H];
  }
  return out;
}

}  // namespace detail

std::size_t qgru_param_count(std::size_t input_dim, std::size_t hidden, std::size_t layers, std::size_t n_quantiles) {
  require(layers >= 1, ErrorCode::InvalidArgument, "GRU needs at least one layer");
  return detail::layer_offsets(input_dim, hidden, layers - 1).end + n_quantiles * (hidden + 1);
}

QgruModel init_qgru(std::size_t input_dim, std::size_t hidden, std::size_t layers, const QuantileLevels& quantiles,
                    std::uint64_t seed, bool autoregressive) {
  require(input_dim >= 1 && hidden >= 1 && layers >= 1 && layers <= 2, ErrorCode::InvalidArgument,
          "GRU needs input_dim >= 1, hidden >= 1 and 1 or 2 layers");
  QgruModel m;
  m.quantiles = quantiles;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.layers = layers;
  m.autoregressive = autoregressive;
  m.seed = seed;
  m.params.resize(qgru_param_count(input_dim, hidden, layers, quantiles.size()));
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& v : m.params) v = rng.uniform(-bound, bound);
  return m;
}

GruLayerView layer_view(const QgruModel& m, std::size_t layer) {
  const auto o = detail::layer_offsets(m.input_dim, m.hidden, layer);
  const auto in = static_cast<Eigen::Index>(o.in), H = static_cast<Eigen::Index>(m.hidden);
  const double* p = m.params.data();
  return GruLayerView{{p + o.wz, in, H}, {p + o.wr, in, H}, {p + o.wh, in, H},
                      {p + o.uz, H, H},  {p + o.ur, H, H},  {p + o.uh, H, H},
                      {p + o.bz, H},     {p + o.br, H},     {p + o.bh, H}};
}

Eigen::VectorXd gru_forward(const QgruModel& model, std::span<const double> sequence, std::size_t steps) {
  require(steps * model.input_dim == sequence.size(), ErrorCode::DimensionMismatch,
          "sequence does not match the model input dimension");
  SeqTensor x(1, steps, model.input_dim);
  std::copy(sequence.begin(), sequence.end(), x.values.begin());
  const std::size_t row = 0;
  const RowMat h = detail::forward_batch(model, detail::batch_inputs(x, std::span(&row, 1)), nullptr);
  return h.row(0).transpose();
}

Matrix predict_qgru(const QgruModel& model, const SeqTensor& x) {
  require(x.features == model.input_dim, ErrorCode::DimensionMismatch,
          "QGRU expects " + std::to_string(model.input_dim) + " input channels, got " + std::to_string(x.features));
  Matrix out(x.n, model.quantiles.size());
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < x.n; start += kChunk) {
    rows.clear();
    for (std::size_t i = start; i < std::min(x.n, start + kChunk); ++i) rows.push_back(i);
    const RowMat y = detail::heads(model, detail::forward_batch(model, detail::batch_inputs(x, rows), nullptr));
    for (std::size_t b = 0; b < rows.size(); ++b)
      for (std::size_t q = 0; q < model.quantiles.size(); ++q)
        out(rows[b], q) = y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(q));
  }
  return out;
}

SeqTensor append_feedback_channel(const SeqTensor& x, std::span<const double> feedback) {
  require(feedback.size() == x.n, ErrorCode::DimensionMismatch, "one feedback value per sample required");
  SeqTensor out(x.n, x.steps, x.features + 1);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t t = 0; t < x.steps; ++t) {
      for (std::size_t f = 0; f < x.features; ++f) out.at(i, t, f) = x.at(i, t, f);
      out.at(i, t, x.features) = feedback[i];
    }
  return out;
}

Matrix predict_qgru_autoregressive(const QgruModel& model, const SeqTensor& x, std::span<const std::size_t> parent,
                                   std::span<const std::size_t> position) {
  require(model.autoregressive, ErrorCode::InvalidArgument, "model was not trained with the feedback channel");
  require(x.features + 1 == model.input_dim, ErrorCode::DimensionMismatch, "input channels do not match the model");
  require(parent.size() == x.n && position.size() == x.n, ErrorCode::DimensionMismatch,
          "parent/position length mismatch");

  std::map<std::size_t, std::vector<std::size_t>> chains;  // parent -> rows by position
  for (std::size_t i = 0; i < x.n; ++i) {
    auto& chain = chains[parent[i]];
    require(position[i] == chain.size(), ErrorCode::InvalidArgument,
            "subsequences of parent " + std::to_string(parent[i]) + " are not in time order");
    chain.push_back(i);
  }

  const std::size_t med = model.quantiles.median_index();
  Matrix out(x.n, model.quantiles.size());
  std::vector<double> feedback(x.n, 0.0);
  for (std::size_t k = 0;; ++k) {
    std::vector<std::size_t> rows;
    for (const auto& [p, chain] : chains)
      if (k < chain.size()) rows.push_back(chain[k]);
    if (rows.empty()) break;
    SeqTensor step = append_feedback_channel(x.select(rows), [&] {
      std::vector<double> fb;
      for (auto r : rows) fb.push_back(feedback[r]);
      return fb;
    }());
    const Matrix pred = predict_qgru(model, step);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      for (std::size_t q = 0; q < model.quantiles.size(); ++q) out(rows[b], q) = pred(b, q);
      const auto& chain = chains[parent[rows[b]]];
      if (k + 1 < chain.size()) feedback[chain[k + 1]] = pred(b, med);
    }
  }
  return out;
}

}  // namespace hystlab::models

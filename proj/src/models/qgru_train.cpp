#include <cmath>
#include <numeric>

#include "gru_internal.hpp"
#include "hystlab/random.hpp"

namespace hystlab::models {

namespace {

using MapMat = Eigen::Map<RowMat>;
using MapVec = Eigen::Map<Eigen::RowVectorXd>;

double pinball(double y, double yhat, double tau) { return y >= yhat ? tau * (y - yhat) : (1.0 - tau) * (yhat - y); }

}  // namespace

LossGradient qgru_loss_gradient(const QgruModel& model, const SeqTensor& x, std::span<const double> y,
                                std::span<const std::size_t> rows) {
  require(x.features == model.input_dim, ErrorCode::DimensionMismatch, "input channels do not match the model");
  require(y.size() == x.n, ErrorCode::DimensionMismatch, "label count does not match samples");
  require(!rows.empty(), ErrorCode::NoSamples, "empty batch");

  const auto B = static_cast<Eigen::Index>(rows.size());
  const auto H = static_cast<Eigen::Index>(model.hidden);
  const auto Q = static_cast<Eigen::Index>(model.quantiles.size());
  const std::vector<RowMat> inputs = detail::batch_inputs(x, rows);
  std::vector<detail::LayerCache> caches;
  const RowMat h_top = detail::forward_batch(model, inputs, &caches);
  const RowMat yhat = detail::heads(model, h_top);

  LossGradient out;
  out.gradient.assign(model.params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(B * Q);
  RowMat dyhat(B, Q);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double tau = model.quantiles[static_cast<std::size_t>(q)];
      const double yi = y[rows[static_cast<std::size_t>(b)]];
      out.loss += pinball(yi, yhat(b, q), tau);
      dyhat(b, q) = (yi >= yhat(b, q) ? -tau : 1.0 - tau) * scale;
    }
  out.loss *= scale;

  // Heads.
  const std::size_t ho = detail::head_offset(model);
  RowMat dh = RowMat::Zero(B, H);
  for (Eigen::Index q = 0; q < Q; ++q) {
    const std::size_t o = ho + static_cast<std::size_t>(q * (H + 1));
    Eigen::Map<const Eigen::VectorXd> w(model.params.data() + o, H);
    Eigen::Map<Eigen::VectorXd> gw(out.gradient.data() + o, H);
    gw += h_top.transpose() * dyhat.col(q);
    out.gradient[o + static_cast<std::size_t>(H)] += dyhat.col(q).sum();
    dh += dyhat.col(q) * w.transpose();
  }

  const std::size_t steps = inputs.size();
  std::vector<RowMat> dh_seq;  // gradient flowing into the current layer's outputs per step
  for (std::size_t li = model.layers; li-- > 0;) {
    const auto v = layer_view(model, li);
    const auto o = detail::layer_offsets(model.input_dim, model.hidden, li);
    const auto in = static_cast<Eigen::Index>(o.in);
    double* g = out.gradient.data();
    MapMat gwz(g + o.wz, in, H), gwr(g + o.wr, in, H), gwh(g + o.wh, in, H);
    MapMat guz(g + o.uz, H, H), gur(g + o.ur, H, H), guh(g + o.uh, H, H);
    MapVec gbz(g + o.bz, H), gbr(g + o.br, H), gbh(g + o.bh, H);
    const auto& c = caches[li];

    std::vector<RowMat> dx_seq(steps);
    RowMat carry = li + 1 == model.layers ? dh : RowMat::Zero(B, H);
    for (std::size_t t = steps; t-- > 0;) {
      RowMat dht = carry;
      if (li + 1 < model.layers) dht += dh_seq[t];
      const RowMat& xt = li == 0 ? inputs[t] : caches[li - 1].h[t + 1];
      const RowMat& hp = c.h[t];
      const RowMat& z = c.z[t];
      const RowMat& r = c.r[t];
      const RowMat& hc = c.hc[t];

      const RowMat dz = dht.cwiseProduct(hc - hp);
      const RowMat dhc = dht.cwiseProduct(z);
      RowMat dhp = dht - dht.cwiseProduct(z);

      const RowMat dah = dhc.array() * (1.0 - hc.array().square());
      const RowMat rh = r.cwiseProduct(hp);
      gwh.noalias() += xt.transpose() * dah;
      guh.noalias() += rh.transpose() * dah;
      gbh += dah.colwise().sum();
      const RowMat drh = dah * v.uh.transpose();
      const RowMat dr = drh.cwiseProduct(hp);
      dhp += drh.cwiseProduct(r);

      const RowMat daz = dz.array() * z.array() * (1.0 - z.array());
      const RowMat dar = dr.array() * r.array() * (1.0 - r.array());
      gwz.noalias() += xt.transpose() * daz;
      guz.noalias() += hp.transpose() * daz;
      gbz += daz.colwise().sum();
      gwr.noalias() += xt.transpose() * dar;
      gur.noalias() += hp.transpose() * dar;
      gbr += dar.colwise().sum();
      dhp.noalias() += daz * v.uz.transpose() + dar * v.ur.transpose();

      if (li > 0) dx_seq[t] = daz * v.wz.transpose() + dar * v.wr.transpose() + dah * v.wh.transpose();
      carry = std::move(dhp);
    }
    dh_seq = std::move(dx_seq);
  }
  return out;
}

namespace {

double aql_of(const QgruModel& m, const SeqTensor& x, std::span<const double> y) {
  const Matrix p = predict_qgru(m, x);
  double s = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t q = 0; q < p.cols(); ++q) s += pinball(y[i], p(i, q), m.quantiles[q]);
  return s / static_cast<double>(p.rows() * p.cols());
}

}  // namespace

QgruModel train_qgru(const SeqTensor& x, std::span<const double> y, const QuantileLevels& quantiles,
                     const QgruParams& params, std::uint64_t seed, QgruValidation validation, const QgruModel* init,
                     QgruTrace* trace) {
  require(y.size() == x.n, ErrorCode::DimensionMismatch, "label count does not match samples");
  require(x.n >= 1, ErrorCode::NoSamples, "QGRU needs training samples");
  require(params.batch_size >= 1 && params.batch_size <= x.n, ErrorCode::InvalidArgument,
          "batch size " + std::to_string(params.batch_size) + " exceeds " + std::to_string(x.n) + " samples");
  require(params.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  for (double v : x.values) require(std::isfinite(v), ErrorCode::Numeric, "non-finite input value");
  for (double v : y) require(std::isfinite(v), ErrorCode::Numeric, "non-finite label");

  QgruModel model;
  if (init) {
    require(init->input_dim == x.features && init->quantiles == quantiles, ErrorCode::DimensionMismatch,
            "pretrained model does not match the data");
    model = *init;
  } else {
    model = init_qgru(x.features, params.hidden, params.layers, quantiles, seed);
    const std::size_t ho = detail::head_offset(model);
    for (std::size_t q = 0; q < quantiles.size(); ++q)
      model.params[ho + q * (params.hidden + 1) + params.hidden] = empirical_quantile(y, quantiles[q]);
  }
  model.train_params = params;
  model.seed = seed;

  const bool has_val = validation.x != nullptr && validation.x->n > 0;
  double best_val = has_val ? aql_of(model, *validation.x, validation.y) : 0.0;
  std::vector<double> best_params = model.params;
  if (trace) {
    *trace = QgruTrace{};
    if (has_val) trace->val_aql.push_back(best_val);
  }

  const std::size_t P = model.params.size();
  std::vector<double> m1(P, 0.0), m2(P, 0.0);
  std::vector<std::size_t> order(x.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5EED));
  std::size_t since_best = 0, adam_step = 0;

  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < x.n; start += params.batch_size) {
      const std::size_t end = std::min(x.n, start + params.batch_size);
      auto lg = qgru_loss_gradient(model, x, y, std::span(order).subspan(start, end - start));
      double norm = 0.0;
      for (double g : lg.gradient) norm += g * g;
      norm = std::sqrt(norm);
      if (norm > params.clip_norm && norm > 0.0)
        for (auto& g : lg.gradient) g *= params.clip_norm / norm;

      if (params.optimizer == Optimizer::Momentum) {
        for (std::size_t i = 0; i < P; ++i) {
          m1[i] = 0.9 * m1[i] + lg.gradient[i];
          model.params[i] -= params.learning_rate * m1[i];
        }
      } else {
        ++adam_step;
        const double c1 = 1.0 - std::pow(0.9, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(0.999, static_cast<double>(adam_step));
        for (std::size_t i = 0; i < P; ++i) {
          const double g = lg.gradient[i];
          m1[i] = 0.9 * m1[i] + 0.1 * g;
          m2[i] = 0.999 * m2[i] + 0.001 * g * g;
          model.params[i] -= params.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + 1e-8);
        }
      }
    }

    if (trace) trace->train_loss.push_back(aql_of(model, x, y));
    if (has_val) {
      const double v = aql_of(model, *validation.x, validation.y);
      if (trace) trace->val_aql.push_back(v);
      if (v < best_val - 1e-12) {
        best_val = v;
        best_params = model.params;
        since_best = 0;
        if (trace) trace->best_epoch = epoch + 1;
      } else if (++since_best >= params.patience) {
        break;
      }
    } else {
      best_params = model.params;
      if (trace) trace->best_epoch = epoch + 1;
    }
  }

  model.params = std::move(best_params);
  quantize_f32(model.params);
  return model;
}

}  // namespace hystlab::models

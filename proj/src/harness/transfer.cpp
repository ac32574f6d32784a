#include <algorithm>
#include <cmath>

#include "hystlab/harness.hpp"

namespace hystlab::harness {

using nlohmann::json;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Retrain: return "bb";
    case Strategy::ZeroShot: return "ab";
    case Strategy::FineTune: return "ftb";
    case Strategy::Joint: return "joint";
  }
  return "?";
}

std::string to_string(ScalerChoice s) { return s == ScalerChoice::Old ? "old" : "new"; }

Strategy strategy_from_string(const std::string& name) {
  if (name == "bb") return Strategy::Retrain;
  if (name == "ab") return Strategy::ZeroShot;
  if (name == "ftb") return Strategy::FineTune;
  if (name == "joint") return Strategy::Joint;
  fail(ErrorCode::InvalidArgument, "unknown strategy '" + name + "' (expected bb, ab, ftb or joint)");
}

ScalerChoice scaler_from_string(const std::string& name) {
  if (name == "old") return ScalerChoice::Old;
  if (name == "new") return ScalerChoice::New;
  fail(ErrorCode::InvalidArgument, "unknown scaler '" + name + "' (expected old or new)");
}

void TransferSpec::validate() const {
  require(steps >= 1, ErrorCode::InvalidArgument, "transfer needs at least one resampled step");
  require(!subsequence || length >= 1, ErrorCode::InvalidArgument, "subsequence length must be positive");
  require(config.kind == ModelKind::Qgru, ErrorCode::InvalidArgument, "transfer strategies train QGRU models");
  require(finetune_lr_factor > 0.0, ErrorCode::InvalidArgument, "fine-tune learning-rate factor must be positive");
  require(b_train_fraction >= 0.0 && b_train_fraction <= 1.0, ErrorCode::InvalidArgument,
          "b_train_fraction must lie in [0, 1]");
}

json transfer_spec_to_json(const TransferSpec& s) {
  return {{"subsequence", s.subsequence},
          {"length", s.length},
          {"steps", s.steps},
          {"config", config_to_json(s.config)},
          {"finetune_lr_factor", s.finetune_lr_factor},
          {"finetune_epochs", s.finetune_epochs ? json(*s.finetune_epochs) : json(nullptr)},
          {"max_train_samples", s.max_train_samples},
          {"b_train_fraction", s.b_train_fraction},
          {"seed", s.seed}};
}

TransferSpec transfer_spec_from_json(const json& doc, const TransferSpec& base) {
  TransferSpec s = base;
  try {
    s.subsequence = doc.value("subsequence", s.subsequence);
    s.length = doc.value("length", s.length);
    s.steps = doc.value("steps", s.steps);
    if (doc.contains("config")) {
      json c = doc.at("config");
      if (!c.contains("model")) c["model"] = "qgru";
      s.config = config_from_json(c);
    }
    s.finetune_lr_factor = doc.value("finetune_lr_factor", s.finetune_lr_factor);
    if (doc.contains("finetune_epochs"))
      s.finetune_epochs = doc.at("finetune_epochs").is_null() ? std::nullopt
                                                               : std::optional(doc.at("finetune_epochs").get<std::size_t>());
    s.max_train_samples = doc.value("max_train_samples", s.max_train_samples);
    s.b_train_fraction = doc.value("b_train_fraction", s.b_train_fraction);
    s.seed = doc.value("seed", s.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("transfer settings: ") + e.what());
  }
  s.config.kind = ModelKind::Qgru;
  s.validate();
  return s;
}

namespace {

std::vector<double> pick(const std::vector<double>& v, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

// Element-wise envelope of two fits equals a min-max fit on the union of rows.
harmonize::MinMaxScalerParams envelope(const harmonize::MinMaxScalerParams& a, const harmonize::MinMaxScalerParams& b) {
  auto out = a;
  for (std::size_t f = 0; f < out.min.size(); ++f) {
    out.min[f] = std::min(a.min[f], b.min[f]);
    out.max[f] = std::max(a.max[f], b.max[f]);
  }
  out.fitted_on = a.fitted_on + "+" + b.fitted_on;
  return out;
}

SeqTensor stack(const SeqTensor& a, const SeqTensor& b) {
  if (b.n == 0) return a;
  require(a.steps == b.steps && a.features == b.features, ErrorCode::DimensionMismatch, "tensor shapes differ");
  SeqTensor out = a;
  out.n += b.n;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  return out;
}

}  // namespace

TransferStudy::TransferStudy(const FleetData& a, const FleetData& b, TransferSpec spec, QuantileLevels quantiles)
    : spec_(std::move(spec)), quantiles_(std::move(quantiles)) {
  spec_.validate();
  a_ = build(a);
  b_ = build(b);
  a_split_ = split_samples(a_, spec_.seed);
  b_split_ = split_samples(b_, spec_.seed);
  a_train_ = cap(a_split_.train_ids, 1);
  a_val_ = cap(a_split_.val_ids, 2);
  auto share = [&](std::vector<std::size_t> rows, std::uint64_t salt) {
    rows = cap(std::move(rows), salt);
    const auto keep = static_cast<std::size_t>(std::floor(spec_.b_train_fraction * static_cast<double>(rows.size()) + 1e-9));
    if (keep < rows.size()) {
      Rng rng(derive_seed(spec_.seed, salt + 100));
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(keep);
      std::sort(rows.begin(), rows.end());
    }
    return rows;
  };
  b_train_ = share(b_split_.train_ids, 3);
  b_val_ = share(b_split_.val_ids, 4);
  require(!a_train_.empty(), ErrorCode::NoSamples, "fleet " + a.fleet_id + " has no training samples");
  require(!b_split_.test_ids.empty(), ErrorCode::NoSamples, "fleet " + b.fleet_id + " has no test samples");
}

SampleSet TransferStudy::build(const FleetData& f) const {
  if (spec_.subsequence) return subsequence_tensor(f, spec_.length, spec_.steps);
  return sequence_tensor(f, spec_.length ? WindowLength(spec_.length) : harmonize::kAll, spec_.steps);
}

std::vector<std::size_t> TransferStudy::cap(std::vector<std::size_t> rows, std::uint64_t salt) const {
  if (spec_.max_train_samples == 0 || rows.size() <= spec_.max_train_samples) return rows;
  Rng rng(derive_seed(spec_.seed, salt));
  rng.shuffle(std::span<std::size_t>(rows));
  rows.resize(spec_.max_train_samples);
  std::sort(rows.begin(), rows.end());
  return rows;
}

void TransferStudy::log(const std::string& scope, const std::string& phase, std::span<const std::size_t> rows,
                        bool fleet_b) {
  // B rows are offset by |A| so both fleets share one id space
  std::vector<std::size_t> ids(rows.begin(), rows.end());
  if (fleet_b)
    for (auto& r : ids) r += a_.size();
  audit_.log(scope + ":" + phase, ids);
}

harmonize::MinMaxScalerParams TransferStudy::scaler_for(Strategy s, ScalerChoice c) const {
  auto fit = [](const SampleSet& set, std::span<const std::size_t> rows, const char* tag) {
    auto p = harmonize::fit_minmax(set.tensor, rows);
    p.fitted_on = tag;
    return p;
  };
  const auto old = fit(a_, a_train_, "A");
  if (c == ScalerChoice::Old) return old;
  if (s == Strategy::Retrain || s == Strategy::ZeroShot) {
    require(!b_train_.empty(), ErrorCode::NoSamples, "the new scaler needs fleet-B training rows");
    return fit(b_, b_train_, "B");
  }
  if (b_train_.empty()) return old;
  return envelope(old, fit(b_, b_train_, "B"));
}

SeqTensor TransferStudy::scaled(const SampleSet& s, const harmonize::MinMaxScalerParams& p) const {
  return harmonize::apply_minmax(s.tensor, p);
}

const models::QgruModel& TransferStudy::pretrained(ScalerChoice scaler) {
  auto& slot = pretrained_[scaler == ScalerChoice::Old ? 0 : 1];
  if (!slot) {
    // the pretrained model lives in the scaler space the downstream strategy uses
    const auto p = scaler_for(scaler == ScalerChoice::Old ? Strategy::ZeroShot : Strategy::FineTune, scaler);
    const SeqTensor xa = scaled(a_, p);
    const SeqTensor x = xa.select(a_train_);
    const SeqTensor vx = xa.select(a_val_);
    const auto y = pick(a_.labels, a_train_);
    const auto vy = pick(a_.labels, a_val_);
    auto params = spec_.config.qgru;
    params.batch_size = std::min(params.batch_size, x.n);
    slot = models::train_qgru(x, y, quantiles_, params, spec_.config.seed, {&vx, vy});
    const std::string scope = "pretrain/" + to_string(scaler);
    log(scope, "scaler", a_train_, false);
    log(scope, "train", a_train_, false);
    log(scope, "early_stop", a_val_, false);
  }
  return *slot;
}

metrics::EvalReport TransferStudy::run(Strategy strategy, ScalerChoice choice) {
  const std::string scope = "transfer/" + to_string(strategy) + "/" + to_string(choice);
  const auto scaler = scaler_for(strategy, choice);
  const SeqTensor xb = scaled(b_, scaler);
  auto params = spec_.config.qgru;
  models::QgruModel model;

  switch (strategy) {
    case Strategy::Retrain: {
      require(!b_train_.empty(), ErrorCode::NoSamples, "retraining needs fleet-B training rows");
      const SeqTensor x = xb.select(b_train_), vx = xb.select(b_val_);
      const auto vy = pick(b_.labels, b_val_);
      params.batch_size = std::min(params.batch_size, x.n);
      model = models::train_qgru(x, pick(b_.labels, b_train_), quantiles_, params, spec_.config.seed, {&vx, vy});
      log(scope, "scaler", choice == ScalerChoice::Old ? a_train_ : b_train_, choice == ScalerChoice::New);
      log(scope, "train", b_train_, true);
      log(scope, "early_stop", b_val_, true);
      break;
    }
    case Strategy::ZeroShot:
      model = pretrained(ScalerChoice::Old);
      if (choice == ScalerChoice::New) log(scope, "scaler", b_train_, true);
      break;
    case Strategy::FineTune: {
      const auto& base = pretrained(choice);
      require(!b_train_.empty(), ErrorCode::NoSamples, "fine-tuning needs fleet-B training rows");
      const SeqTensor x = xb.select(b_train_), vx = xb.select(b_val_);
      const auto vy = pick(b_.labels, b_val_);
      params.learning_rate *= spec_.finetune_lr_factor;
      if (spec_.finetune_epochs) params.max_epochs = *spec_.finetune_epochs;
      params.batch_size = std::min(params.batch_size, x.n);
      model = models::train_qgru(x, pick(b_.labels, b_train_), quantiles_, params, spec_.config.seed, {&vx, vy}, &base);
      log(scope, "train", b_train_, true);
      log(scope, "early_stop", b_val_, true);
      if (choice == ScalerChoice::New) log(scope, "scaler", b_train_, true);
      break;
    }
    case Strategy::Joint: {
      const SeqTensor xa = scaled(a_, scaler);
      const SeqTensor x = stack(xa.select(a_train_), xb.select(b_train_));
      const SeqTensor vx = stack(xa.select(a_val_), xb.select(b_val_));
      auto y = pick(a_.labels, a_train_);
      for (auto r : b_train_) y.push_back(b_.labels[r]);
      auto vy = pick(a_.labels, a_val_);
      for (auto r : b_val_) vy.push_back(b_.labels[r]);
      params.batch_size = std::min(params.batch_size, x.n);
      model = models::train_qgru(x, y, quantiles_, params, spec_.config.seed, {&vx, vy});
      log(scope, "train", a_train_, false);
      log(scope, "train", b_train_, true);
      log(scope, "early_stop", a_val_, false);
      log(scope, "early_stop", b_val_, true);
      if (choice == ScalerChoice::New) log(scope, "scaler", b_train_, true);
      break;
    }
  }

  const auto& test = b_split_.test_ids;
  log(scope, "test", test, true);
  const Matrix pred = models::repair_quantile_crossing(models::predict_qgru(model, xb.select(test)));
  const json state{{"features", "tensor"}, {"scaler", harmonize::scaler_to_json(scaler)}};
  return metrics::evaluate(pick(b_.labels, test), pred, quantiles_, metrics::rom_mb(model, state),
                           metrics::ram_mb(model, {xb.steps, model.input_dim}));
}

std::vector<TransferRow> TransferStudy::run_all() {
  std::vector<TransferRow> rows;
  for (auto s : {Strategy::Retrain, Strategy::ZeroShot, Strategy::FineTune, Strategy::Joint})
    for (auto c : {ScalerChoice::Old, ScalerChoice::New}) rows.push_back({s, c, run(s, c), 0.0});
  const double base = rows.front().report.aql;
  for (auto& r : rows) r.change_pct = base > 0.0 ? 100.0 * (r.report.aql - base) / base : 0.0;
  return rows;
}

metrics::EvalReport run_transfer(const FleetData& a, const FleetData& b, Strategy strategy, ScalerChoice scaler,
                                 const TransferSpec& spec, const QuantileLevels& quantiles) {
  TransferStudy study(a, b, spec, quantiles);
  return study.run(strategy, scaler);
}

}  // namespace hystlab::harness

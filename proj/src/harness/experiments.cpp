#include <algorithm>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <cmath>
#include <limits>
#include <map>

#include "hystlab/harness.hpp"
#include "hystlab/parallel.hpp"

namespace hystlab::harness {

using nlohmann::json;

// ---- audit -----------------------------------------------------------------------

void RowAudit::log(const std::string& phase, std::span<const std::size_t> rows) {
  phases[phase].insert(rows.begin(), rows.end());
}

void RowAudit::merge(const RowAudit& other) {
  for (const auto& [k, v] : other.phases) phases[k].insert(v.begin(), v.end());
}

namespace {

std::pair<std::string, std::string> split_scope(const std::string& phase) {
  const auto cut = phase.rfind(':');
  if (cut == std::string::npos) return {"", phase};
  return {phase.substr(0, cut), phase.substr(cut + 1)};
}

}  // namespace

bool RowAudit::disjoint() const {
  for (const auto& [name, test] : phases) {
    const auto [scope, leaf] = split_scope(name);
    if (leaf != "test") continue;
    for (const auto& [other, rows] : phases) {
      if (other == name || split_scope(other).first != scope) continue;
      for (auto r : rows)
        if (test.count(r)) return false;
    }
  }
  return true;
}

json RowAudit::to_json() const {
  json counts = json::object();
  for (const auto& [k, v] : phases) counts[k] = v.size();
  return {{"disjoint", disjoint()}, {"phases", counts}};
}

// ---- pipeline ------------------------------------------------------------------------

std::vector<double> feedback_labels(const SampleSet& s, std::span<const std::size_t> rows) {
  std::map<std::pair<std::size_t, std::size_t>, double> label_at;
  for (std::size_t i = 0; i < s.size(); ++i) label_at[{s.parent[i], s.position[i]}] = s.labels[i];
  std::vector<double> fb;
  fb.reserve(rows.size());
  for (auto r : rows) {
    if (s.position[r] == 0) {
      fb.push_back(0.0);
      continue;
    }
    const auto it = label_at.find({s.parent[r], s.position[r] - 1});
    fb.push_back(it == label_at.end() ? 0.0 : it->second);
  }
  return fb;
}

namespace {

template <class T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

SeqTensor model_input(const SampleSet& s, std::span<const std::size_t> rows,
                      const harmonize::MinMaxScalerParams& scaler, bool feedback) {
  SeqTensor x = harmonize::apply_minmax(s.tensor.select(rows), scaler);
  if (feedback) x = models::append_feedback_channel(x, feedback_labels(s, rows));
  return x;
}

}  // namespace

Matrix Pipeline::predict(const SampleSet& s, std::span<const std::size_t> rows) const {
  if (features == FeatureKind::Stats) {
    require(s.kind == FeatureKind::Stats, ErrorCode::InvalidArgument, "pipeline expects statistical features");
    const Matrix x = reducer.apply(harmonize::apply_minmax(s.stats.select_rows(rows), scaler));
    return std::visit(
        [&](const auto& m) -> Matrix {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, models::LqrModel>) return models::predict_lqr(m, x);
          else if constexpr (std::is_same_v<T, models::QxgbModel>) return models::predict_qxgb(m, x);
          else fail(ErrorCode::InvalidArgument, "QGRU needs sequence input");
        },
        model);
  }
  require(s.kind == FeatureKind::Tensor, ErrorCode::InvalidArgument, "pipeline expects sequence input");
  const auto* g = std::get_if<models::QgruModel>(&model);
  require(g != nullptr, ErrorCode::InvalidArgument, "sequence pipeline holds a statistical model");
  const SeqTensor x = harmonize::apply_minmax(s.tensor.select(rows), scaler);
  if (!g->autoregressive) return models::predict_qgru(*g, x);
  return models::predict_qgru_autoregressive(*g, x, pick(s.parent, rows), pick(s.position, rows));
}

json Pipeline::state_json() const {
  return {{"features", features == FeatureKind::Stats ? "stats" : "tensor"},
          {"scaler", harmonize::scaler_to_json(scaler)},
          {"reducer", dimred::reducer_to_json(reducer)}};
}

metrics::InputShape Pipeline::input_shape(const SampleSet& s) const {
  if (features == FeatureKind::Stats) return {1, reducer.output_dim(scaler.min.size())};
  const auto& g = std::get<models::QgruModel>(model);
  return {s.tensor.steps, g.input_dim};
}

Pipeline fit_pipeline(const SampleSet& s, std::span<const std::size_t> fit_rows, std::span<const std::size_t> val_rows,
                      const TrainConfig& config, const QuantileLevels& quantiles, RowAudit* audit,
                      const std::string& scope) {
  require(!fit_rows.empty(), ErrorCode::NoSamples, "no training rows");
  const std::string pre = scope.empty() ? "" : scope + ":";
  Pipeline p;
  p.features = s.kind;
  const auto y = pick(s.labels, fit_rows);

  if (s.kind == FeatureKind::Stats) {
    require(config.kind != ModelKind::Qgru, ErrorCode::InvalidArgument, "QGRU needs sequence input");
    const Matrix raw = s.stats.select_rows(fit_rows);
    std::vector<std::size_t> all(raw.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    p.scaler = harmonize::fit_minmax(raw, all);
    const Matrix scaled = harmonize::apply_minmax(raw, p.scaler);
    p.reducer = dimred::fit_reducer(scaled, y, config.reducer, s.feature_names);
    const Matrix x = p.reducer.apply(scaled);
    if (audit) {
      audit->log(pre + "scaler", fit_rows);
      audit->log(pre + "reducer", fit_rows);
      audit->log(pre + "train", fit_rows);
    }
    if (config.kind == ModelKind::Lqr) p.model = models::train_lqr(x, y, quantiles, config.lqr);
    else p.model = models::train_qxgb(x, y, quantiles, config.qxgb, config.seed);
    return p;
  }

  require(config.kind == ModelKind::Qgru, ErrorCode::InvalidArgument,
          "statistical models need statistical features");
  require(config.reducer.kind == ReducerKind::None, ErrorCode::InvalidArgument,
          "dimensionality reduction applies to statistical features only");
  p.scaler = harmonize::fit_minmax(s.tensor, fit_rows);
  const SeqTensor x = model_input(s, fit_rows, p.scaler, config.autoregressive);
  models::QgruParams params = config.qgru;
  params.batch_size = std::min(params.batch_size, x.n);
  SeqTensor vx;
  std::vector<double> vy;
  models::QgruValidation val;
  if (!val_rows.empty()) {
    vx = model_input(s, val_rows, p.scaler, config.autoregressive);
    vy = pick(s.labels, val_rows);
    val = {&vx, vy};
  }
  if (audit) {
    audit->log(pre + "scaler", fit_rows);
    audit->log(pre + "train", fit_rows);
    audit->log(pre + "early_stop", val_rows);
  }
  auto g = models::train_qgru(x, y, quantiles, params, config.seed, val);
  g.autoregressive = config.autoregressive;
  p.model = std::move(g);
  return p;
}

// ---- grids ------------------------------------------------------------------------------

void GridSpec::validate() const {
  auto in = [](std::size_t v, std::initializer_list<std::size_t> menu) {
    return std::find(menu.begin(), menu.end(), v) != menu.end();
  };
  for (const auto& l : sequence_lengths)
    require(!l || in(*l, {600, 3000, 6000}), ErrorCode::InvalidArgument,
            "sequence length must be one of 600, 3000, 6000, all");
  for (auto t : resample_steps)
    require(in(t, {10, 60, 120, 240}), ErrorCode::InvalidArgument, "resample steps must be one of 10, 60, 120, 240");
  for (auto l : subsequence_lengths)
    require(in(l, {100, 600, 3000, 6000}), ErrorCode::InvalidArgument,
            "subsequence length must be one of 100, 600, 3000, 6000");
  for (auto t : subsequence_steps)
    require(in(t, {10, 60, 120, 240}), ErrorCode::InvalidArgument, "resample steps must be one of 10, 60, 120, 240");
  require(cv_folds >= 2, ErrorCode::InvalidArgument, "cv_folds must be at least 2");
  for (const auto& [k, n] : n_trials) require(n >= 1, ErrorCode::InvalidArgument, "n_trials must be at least 1");
}

std::string size_label(WindowLength length) { return length ? std::to_string(*length) : "All"; }

namespace {

std::string model_label(ModelKind k, bool ar) {
  std::string s = models::to_string(k);
  return ar ? s + "*" : s;
}

std::vector<std::size_t> merged(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> cap_rows(std::vector<std::size_t> rows, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || rows.size() <= cap) return rows;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(rows));
  rows.resize(cap);
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::size_t trials_for(const GridSpec& g, ModelKind k) {
  const auto it = g.n_trials.find(k);
  return it == g.n_trials.end() ? 1 : it->second;
}

struct Cell {
  std::string name;
  std::size_t samples = 0;  // index into the prepared sample sets
  ModelKind kind = ModelKind::Lqr;
  ReducerKind dimred = ReducerKind::None;
  std::string size, resample;
  bool ar_companion = false;  // also fit QGRU* with the tuned config
};

struct CellResult {
  std::vector<ReportRow> rows;
  std::optional<CellFailure> failure;
  RowAudit audit;
};

struct Prepared {
  SampleSet set;
  core::DataSplit split;
  std::vector<std::size_t> tune_rows;   // capped train + val, for the search
  std::vector<std::size_t> train_rows;  // capped
  std::vector<std::size_t> val_rows;
};

Prepared prepare(SampleSet s, const GridSpec& grid, std::size_t cap, std::uint64_t salt) {
  Prepared p;
  p.split = split_samples(s, grid.seed);
  p.train_rows = cap_rows(p.split.train_ids, cap, derive_seed(grid.seed, salt));
  p.val_rows = cap_rows(p.split.val_ids, cap ? std::max<std::size_t>(1, cap / 8) : 0, derive_seed(grid.seed, salt + 1));
  p.tune_rows = merged(p.train_rows, p.val_rows);
  p.set = std::move(s);
  return p;
}

ReportRow evaluate_row(const Pipeline& pipe, const Prepared& data, const Cell& cell, const TrainConfig& cfg,
                       const QuantileLevels& quantiles, RowAudit& audit, const std::string& scope) {
  const auto& test = data.split.test_ids;
  require(!test.empty(), ErrorCode::NoSamples, "empty test split");
  audit.log(scope + ":test", test);
  const Matrix pred = models::repair_quantile_crossing(pipe.predict(data.set, test));
  const auto y = pick(data.set.labels, test);
  ReportRow row;
  row.dimred = dimred::to_string(cell.dimred);
  row.model = model_label(cell.kind, cfg.autoregressive);
  row.size = cell.size;
  row.resample = cell.resample;
  row.aql = metrics::aql(y, pred, quantiles);
  row.rom_mb = metrics::rom_mb(pipe.model, pipe.state_json());
  row.ram_mb = metrics::ram_mb(pipe.model, pipe.input_shape(data.set));
  row.config = config_to_json(cfg);
  return row;
}

CellResult run_cell(const Cell& cell, const Prepared& data, const GridSpec& grid, const SearchSpace& space,
                    const QuantileLevels& quantiles, std::uint64_t cell_seed) {
  CellResult out;
  try {
    const auto& s = data.set;
    auto sampler = [&](Rng& rng) {
      TrainConfig c = sample_config(cell.kind, space, rng);
      c.reducer.kind = cell.dimred;
      c.reducer.pca.variance = grid.pca_variance;
      c.reducer.freg_k = grid.freg_k;
      return c;
    };
    auto scorer = [&](const TrainConfig& c, std::span<const std::size_t> fit, std::span<const std::size_t> val) {
      const Pipeline p = fit_pipeline(s, fit, val, c, quantiles);
      const Matrix pred = models::repair_quantile_crossing(p.predict(s, val));
      return metrics::aql(pick(s.labels, val), pred, quantiles);
    };
    out.audit.log(cell.name + ":search", data.tune_rows);
    const auto search = random_search_cv(sampler, scorer, data.tune_rows, trials_for(grid, cell.kind), grid.cv_folds,
                                         cell_seed, 1);

    auto final_fit = [&](const TrainConfig& cfg, const std::string& scope) {
      // QGRU keeps the validation split for early stopping; the others refit on train + val
      const bool seq = cfg.kind == ModelKind::Qgru;
      const Pipeline p = seq ? fit_pipeline(s, data.train_rows, data.val_rows, cfg, quantiles, &out.audit, scope)
                             : fit_pipeline(s, data.tune_rows, {}, cfg, quantiles, &out.audit, scope);
      out.rows.push_back(evaluate_row(p, data, cell, cfg, quantiles, out.audit, scope));
    };
    final_fit(search.best, cell.name);
    if (cell.ar_companion) {
      TrainConfig ar = search.best;
      ar.autoregressive = true;
      final_fit(ar, cell.name + "*");
    }
  } catch (const std::exception& e) {
    out.rows.clear();
    out.failure = CellFailure{cell.name, e.what()};
  }
  return out;
}

ExperimentReport run_cells(const std::vector<Cell>& cells, const std::vector<Prepared>& data, const GridSpec& grid,
                           const SearchSpace& space, const QuantileLevels& quantiles, unsigned threads,
                           std::uint64_t salt) {
  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), threads ? threads : core::worker_threads(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    results[i] = run_cell(cells[i], data[cells[i].samples], grid, space, quantiles, derive_seed(grid.seed, salt + i));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "  " << cells[i].name << (results[i].failure ? " failed" : " done") << " in " << std::fixed
         << std::setprecision(1) << secs << " s\n";
    std::clog << line.str();
  });
  ExperimentReport rep;
  for (auto& r : results) {
    for (auto& row : r.rows) rep.rows.push_back(std::move(row));
    if (r.failure) rep.failures.push_back(*r.failure);
    rep.audit.merge(r.audit);
  }
  return rep;
}

bool has_model(const GridSpec& g, ModelKind k) {
  return std::find(g.models.begin(), g.models.end(), k) != g.models.end();
}

}  // namespace

ExperimentReport run_sequence_level(const FleetData& fleet, const GridSpec& grid, const SearchSpace& space,
                                    const QuantileLevels& quantiles, unsigned threads) {
  grid.validate();
  space.validate();
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet " + fleet.fleet_id + " has no segments");
  std::vector<Prepared> data;
  std::vector<Cell> cells;
  const bool stats = has_model(grid, ModelKind::Lqr) || has_model(grid, ModelKind::Qxgb);
  for (const auto& len : grid.sequence_lengths) {
    if (stats) {
      const std::size_t idx = data.size();
      data.push_back(prepare(sequence_stats(fleet, len), grid, 0, idx));
      for (auto dr : grid.dimreds)
        for (auto k : grid.models) {
          if (k == ModelKind::Qgru) continue;
          cells.push_back({"seq/" + size_label(len) + "/" + dimred::to_string(dr) + "/" + models::to_string(k), idx, k,
                           dr, size_label(len), "-", false});
        }
    }
    if (has_model(grid, ModelKind::Qgru))
      for (auto t : grid.resample_steps) {
        const std::size_t idx = data.size();
        data.push_back(prepare(sequence_tensor(fleet, len, t), grid, 0, idx));
        cells.push_back({"seq/" + size_label(len) + "/" + std::to_string(t) + "/qgru", idx, ModelKind::Qgru,
                         ReducerKind::None, size_label(len), std::to_string(t), false});
      }
  }
  return run_cells(cells, data, grid, space, quantiles, threads, 0x5E0);
}

ExperimentReport run_subsequence_level(const FleetData& fleet, const GridSpec& grid, const SearchSpace& space,
                                       const QuantileLevels& quantiles, bool autoregressive, unsigned threads) {
  grid.validate();
  space.validate();
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet " + fleet.fleet_id + " has no segments");
  std::vector<Prepared> data;
  std::vector<Cell> cells;
  ExperimentReport early;
  for (auto len : grid.subsequence_lengths)
    for (auto t : grid.subsequence_steps) {
      const std::string name = "sub/" + std::to_string(len) + "/" + std::to_string(t) + "/qgru";
      try {
        const std::size_t idx = data.size();
        data.push_back(prepare(subsequence_tensor(fleet, len, t), grid, grid.max_train_samples, idx));
        cells.push_back({name, idx, ModelKind::Qgru, ReducerKind::None, std::to_string(len), std::to_string(t),
                         autoregressive});
      } catch (const Error& e) {
        early.failures.push_back({name, e.what()});
      }
    }
  auto rep = run_cells(cells, data, grid, space, quantiles, threads, 0x5B0);
  rep.failures.insert(rep.failures.begin(), early.failures.begin(), early.failures.end());
  return rep;
}

std::vector<ReportRow> best_rows(std::span<const ReportRow> rows) {
  std::vector<ReportRow> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ReportRow& o) { return o.model == r.model; });
    if (it == out.end()) out.push_back(r);
    else if (r.aql < it->aql) *it = r;
  }
  return out;
}

}  // namespace hystlab::harness

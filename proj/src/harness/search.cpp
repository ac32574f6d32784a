#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hystlab/harness.hpp"
#include "hystlab/parallel.hpp"

namespace hystlab::harness {

using nlohmann::json;

double Range::draw(Rng& rng) const {
  if (hi <= lo) return lo;
  return log ? rng.log_uniform(lo, hi) : rng.uniform(lo, hi);
}

namespace {

std::size_t draw_int(const Range& r, Rng& rng) {
  const auto lo = static_cast<long long>(std::llround(r.lo));
  const auto hi = static_cast<long long>(std::llround(r.hi));
  return static_cast<std::size_t>(rng.integer(lo, std::max(lo, hi)));
}

void check(const Range& r, const char* name, bool positive) {
  require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.hi >= r.lo, ErrorCode::InvalidArgument,
          std::string("empty search range for ") + name);
  require(!positive || r.lo > 0.0, ErrorCode::InvalidArgument, std::string(name) + " range must be positive");
  require(!r.log || r.lo > 0.0, ErrorCode::InvalidArgument, std::string(name) + ": log range needs lo > 0");
}

json range_json(const Range& r) { return {{"lo", r.lo}, {"hi", r.hi}, {"log", r.log}}; }

void read_range(const json& doc, const char* key, Range& r) {
  if (!doc.contains(key)) return;
  const auto& v = doc.at(key);
  if (v.is_array()) {
    require(v.size() == 2, ErrorCode::Parse, std::string("range ") + key + " needs [lo, hi]");
    r.lo = v[0].get<double>();
    r.hi = v[1].get<double>();
  } else if (v.is_number()) {
    r.lo = r.hi = v.get<double>();
  } else {
    r.lo = v.value("lo", r.lo);
    r.hi = v.value("hi", r.hi);
    r.log = v.value("log", r.log);
  }
}

}  // namespace

void SearchSpace::validate() const {
  check(lqr_l1, "lqr l1", false);
  check(qxgb_lr, "qxgb learning_rate", true);
  check(qxgb_depth, "qxgb max_depth", true);
  check(qxgb_subsample, "qxgb subsample", true);
  check(qxgb_lambda, "qxgb lambda", false);
  check(qxgb_alpha, "qxgb alpha", false);
  check(qxgb_min_child, "qxgb min_child_weight", false);
  check(qxgb_colsample, "qxgb colsample", true);
  check(qxgb_rounds, "qxgb rounds", false);
  check(qgru_lr, "qgru learning_rate", true);
  check(qgru_hidden, "qgru hidden", true);
  check(qgru_layers, "qgru layers", true);
  check(qgru_batch, "qgru batch_size", true);
  require(qxgb_subsample.hi <= 1.0 && qxgb_colsample.hi <= 1.0, ErrorCode::InvalidArgument,
          "subsample ratios must not exceed 1");
  require(qgru_layers.hi <= 2.0, ErrorCode::InvalidArgument, "QGRU supports 1 or 2 layers");
}

SearchSpace embedded_search_space() {
  SearchSpace s;
  s.qgru_hidden = {4, 16};
  s.qgru_layers = {1, 1};
  return s;
}

json search_space_to_json(const SearchSpace& s) {
  return {{"lqr", {{"l1", range_json(s.lqr_l1)}}},
          {"qxgb",
           {{"learning_rate", range_json(s.qxgb_lr)}, {"max_depth", range_json(s.qxgb_depth)},
            {"subsample", range_json(s.qxgb_subsample)}, {"lambda", range_json(s.qxgb_lambda)},
            {"alpha", range_json(s.qxgb_alpha)}, {"min_child_weight", range_json(s.qxgb_min_child)},
            {"colsample", range_json(s.qxgb_colsample)}, {"rounds", range_json(s.qxgb_rounds)}}},
          {"qgru",
           {{"learning_rate", range_json(s.qgru_lr)}, {"hidden", range_json(s.qgru_hidden)},
            {"layers", range_json(s.qgru_layers)}, {"batch_size", range_json(s.qgru_batch)},
            {"max_epochs", s.qgru_max_epochs}, {"patience", s.qgru_patience}}}};
}

SearchSpace search_space_from_json(const json& doc) {
  SearchSpace s;
  try {
    if (doc.contains("lqr")) read_range(doc.at("lqr"), "l1", s.lqr_l1);
    if (doc.contains("qxgb")) {
      const auto& q = doc.at("qxgb");
      read_range(q, "learning_rate", s.qxgb_lr);
      read_range(q, "max_depth", s.qxgb_depth);
      read_range(q, "subsample", s.qxgb_subsample);
      read_range(q, "lambda", s.qxgb_lambda);
      read_range(q, "alpha", s.qxgb_alpha);
      read_range(q, "min_child_weight", s.qxgb_min_child);
      read_range(q, "colsample", s.qxgb_colsample);
      read_range(q, "rounds", s.qxgb_rounds);
    }
    if (doc.contains("qgru")) {
      const auto& q = doc.at("qgru");
      read_range(q, "learning_rate", s.qgru_lr);
      read_range(q, "hidden", s.qgru_hidden);
      read_range(q, "layers", s.qgru_layers);
      read_range(q, "batch_size", s.qgru_batch);
      s.qgru_max_epochs = q.value("max_epochs", s.qgru_max_epochs);
      s.qgru_patience = q.value("patience", s.qgru_patience);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("search ranges: ") + e.what());
  }
  s.validate();
  return s;
}

TrainConfig sample_config(ModelKind kind, const SearchSpace& space, Rng& rng) {
  TrainConfig c;
  c.kind = kind;
  c.seed = rng.next();
  switch (kind) {
    case ModelKind::Lqr:
      c.lqr.l1 = space.lqr_l1.draw(rng);
      break;
    case ModelKind::Qxgb:
      c.qxgb.learning_rate = space.qxgb_lr.draw(rng);
      c.qxgb.max_depth = draw_int(space.qxgb_depth, rng);
      c.qxgb.subsample = space.qxgb_subsample.draw(rng);
      c.qxgb.lambda = space.qxgb_lambda.draw(rng);
      c.qxgb.alpha = space.qxgb_alpha.draw(rng);
      c.qxgb.min_child_weight = space.qxgb_min_child.draw(rng);
      c.qxgb.colsample = space.qxgb_colsample.draw(rng);
      c.qxgb.rounds = draw_int(space.qxgb_rounds, rng);
      break;
    case ModelKind::Qgru:
      c.qgru.learning_rate = space.qgru_lr.draw(rng);
      c.qgru.hidden = draw_int(space.qgru_hidden, rng);
      c.qgru.layers = draw_int(space.qgru_layers, rng);
      c.qgru.batch_size = draw_int(space.qgru_batch, rng);
      c.qgru.max_epochs = space.qgru_max_epochs;
      c.qgru.patience = space.qgru_patience;
      break;
  }
  return c;
}

std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> rows, std::size_t k, std::uint64_t seed) {
  require(k >= 2 && rows.size() >= k, ErrorCode::InvalidArgument,
          "k-fold needs k >= 2 and at least k rows (" + std::to_string(rows.size()) + " rows, k = " +
              std::to_string(k) + ")");
  std::vector<std::size_t> perm(rows.begin(), rows.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < perm.size(); ++i) folds[i % k].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

SearchResult random_search_cv(const ConfigSampler& sampler, const FoldScorer& scorer, std::span<const std::size_t> rows,
                              std::size_t n_trials, std::size_t folds, std::uint64_t seed, unsigned threads) {
  require(n_trials >= 1, ErrorCode::InvalidArgument, "random search needs at least one trial");
  Rng rng(seed);
  std::vector<TrainConfig> configs;
  for (std::size_t t = 0; t < n_trials; ++t) configs.push_back(sampler(rng));
  SearchResult out;
  if (n_trials == 1) {
    out.best = configs[0];
    return out;
  }

  const auto parts = kfold(rows, folds, derive_seed(seed, 0xF01D));
  std::vector<std::vector<std::size_t>> fit_rows(folds);
  for (std::size_t f = 0; f < folds; ++f)
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f) fit_rows[f].insert(fit_rows[f].end(), parts[g].begin(), parts[g].end());
  for (auto& r : fit_rows) std::sort(r.begin(), r.end());

  std::vector<double> scores(n_trials * folds);
  parallel_for(n_trials * folds, threads, [&](std::size_t job) {
    const std::size_t t = job / folds, f = job % folds;
    double s = std::numeric_limits<double>::infinity();
    try {
      s = scorer(configs[t], fit_rows[f], parts[f]);
    } catch (const Error&) {
      // a config that cannot be fitted on this fold never wins
    }
    scores[job] = std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  });

  out.trial_scores.assign(n_trials, 0.0);
  for (std::size_t t = 0; t < n_trials; ++t) {
    for (std::size_t f = 0; f < folds; ++f) out.trial_scores[t] += scores[t * folds + f];
    out.trial_scores[t] /= static_cast<double>(folds);
  }
  out.best_trial = static_cast<std::size_t>(
      std::min_element(out.trial_scores.begin(), out.trial_scores.end()) - out.trial_scores.begin());
  out.best = configs[out.best_trial];
  return out;
}

json config_to_json(const TrainConfig& c) {
  json doc{{"model", models::to_string(c.kind)},
           {"seed", c.seed},
           {"dimred", dimred::to_string(c.reducer.kind)},
           {"pca_variance", c.reducer.pca.variance},
           {"freg_k", c.reducer.freg_k}};
  if (c.reducer.pca.components) doc["pca_components"] = *c.reducer.pca.components;
  switch (c.kind) {
    case ModelKind::Lqr:
      doc["lqr"] = {{"l1", c.lqr.l1}, {"learning_rate", c.lqr.learning_rate}, {"max_epochs", c.lqr.max_epochs},
                    {"patience", c.lqr.patience}};
      break;
    case ModelKind::Qxgb:
      doc["qxgb"] = {{"learning_rate", c.qxgb.learning_rate}, {"max_depth", c.qxgb.max_depth},
                     {"subsample", c.qxgb.subsample}, {"lambda", c.qxgb.lambda}, {"alpha", c.qxgb.alpha},
                     {"min_child_weight", c.qxgb.min_child_weight}, {"colsample", c.qxgb.colsample},
                     {"rounds", c.qxgb.rounds}};
      break;
    case ModelKind::Qgru:
      doc["qgru"] = {{"hidden", c.qgru.hidden}, {"layers", c.qgru.layers}, {"learning_rate", c.qgru.learning_rate},
                     {"batch_size", c.qgru.batch_size}, {"max_epochs", c.qgru.max_epochs},
                     {"patience", c.qgru.patience}, {"clip_norm", c.qgru.clip_norm},
                     {"optimizer", models::to_string(c.qgru.optimizer)}};
      break;
  }
  return doc;
}

TrainConfig config_from_json(const json& doc) {
  TrainConfig c;
  try {
    if (doc.contains("model")) c.kind = models::model_kind_from_string(doc.at("model").get<std::string>());
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("dimred")) c.reducer.kind = dimred::reducer_kind_from_string(doc.at("dimred").get<std::string>());
    c.reducer.pca.variance = doc.value("pca_variance", c.reducer.pca.variance);
    if (doc.contains("pca_components")) c.reducer.pca.components = doc.at("pca_components").get<std::size_t>();
    c.reducer.freg_k = doc.value("freg_k", c.reducer.freg_k);
    if (doc.contains("lqr")) {
      const auto& l = doc.at("lqr");
      c.lqr.l1 = l.value("l1", c.lqr.l1);
      c.lqr.learning_rate = l.value("learning_rate", c.lqr.learning_rate);
      c.lqr.max_epochs = l.value("max_epochs", c.lqr.max_epochs);
      c.lqr.patience = l.value("patience", c.lqr.patience);
    }
    if (doc.contains("qxgb")) {
      const auto& q = doc.at("qxgb");
      c.qxgb.learning_rate = q.value("learning_rate", c.qxgb.learning_rate);
      c.qxgb.max_depth = q.value("max_depth", c.qxgb.max_depth);
      c.qxgb.subsample = q.value("subsample", c.qxgb.subsample);
      c.qxgb.lambda = q.value("lambda", c.qxgb.lambda);
      c.qxgb.alpha = q.value("alpha", c.qxgb.alpha);
      c.qxgb.min_child_weight = q.value("min_child_weight", c.qxgb.min_child_weight);
      c.qxgb.colsample = q.value("colsample", c.qxgb.colsample);
      c.qxgb.rounds = q.value("rounds", c.qxgb.rounds);
    }
    if (doc.contains("qgru")) {
      const auto& q = doc.at("qgru");
      c.qgru.hidden = q.value("hidden", c.qgru.hidden);
      c.qgru.layers = q.value("layers", c.qgru.layers);
      c.qgru.learning_rate = q.value("learning_rate", c.qgru.learning_rate);
      c.qgru.batch_size = q.value("batch_size", c.qgru.batch_size);
      c.qgru.max_epochs = q.value("max_epochs", c.qgru.max_epochs);
      c.qgru.patience = q.value("patience", c.qgru.patience);
      c.qgru.clip_norm = q.value("clip_norm", c.qgru.clip_norm);
      if (q.contains("optimizer")) c.qgru.optimizer = models::optimizer_from_string(q.at("optimizer").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("training config: ") + e.what());
  }
  return c;
}

}  // namespace hystlab::harness

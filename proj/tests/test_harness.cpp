#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <doctest.h>

#include "hystlab/error.hpp"
#include "hystlab/harness.hpp"
#include "hystlab/metrics.hpp"
#include "hystlab/random.hpp"
#include "hystlab/synthdata.hpp"
#include "hystlab/textio.hpp"
#include "support.hpp"

using namespace hystlab;
using namespace hystlab::harness;
using testsupport::TempDir;

namespace {

harmonize::SegmentationPolicy desk_policy() {
  harmonize::SegmentationPolicy p;
  p.relax_min_duration_s = 120;
  return p;
}

// Two small fleets generated once per process.
struct Fleets {
  TempDir dir{"fleets"};
  FleetData a, b;
  Fleets() {
    auto sa = synthdata::preset_fleet_a();
    sa.n_cycles = 30;
    auto sb = synthdata::preset_fleet_b();
    sb.n_cycles = 24;
    synthdata::generate_fleet(sa, dir / "A", 1);
    synthdata::generate_fleet(sb, dir / "B", 1);
    a = harmonize_fleet(dir / "A", desk_policy(), 1);
    b = harmonize_fleet(dir / "B", desk_policy(), 1);
  }
};

const Fleets& fleets() {
  static Fleets f;
  return f;
}

TransferSpec small_transfer() {
  TransferSpec s;
  s.subsequence = true;
  s.length = 600;
  s.steps = 20;
  s.config.kind = ModelKind::Qgru;
  s.config.qgru.hidden = 4;
  s.config.qgru.max_epochs = 4;
  s.config.qgru.patience = 4;
  s.config.qgru.learning_rate = 0.01;
  s.config.qgru.batch_size = 16;
  s.config.seed = 3;
  s.max_train_samples = 300;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("kfold partitions rows") {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = static_cast<std::size_t>(rng.integer(5, 300));
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = 3 * i + 1;
    const auto folds = kfold(rows, 5, rng.next());
    REQUIRE(folds.size() == 5);
    std::multiset<std::size_t> seen;
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      seen.insert(f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(hi - lo <= 1);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == n);
    CHECK(seen.size() == n);
    CHECK(*seen.begin() == 1);
  }
}

TEST_CASE("search with one trial returns the draw unscored") {
  std::size_t scored = 0;
  const auto r = random_search_cv(
      [](Rng& rng) { return sample_config(ModelKind::Lqr, SearchSpace{}, rng); },
      [&](const TrainConfig&, auto, auto) { ++scored; return 1.0; }, std::vector<std::size_t>(20, 0), 1, 5, 9);
  CHECK(scored == 0);
  CHECK(r.trial_scores.empty());
  Rng again(9);
  CHECK(r.best.lqr.l1 == sample_config(ModelKind::Lqr, SearchSpace{}, again).lqr.l1);
}

TEST_CASE("search picks the working regime") {
  int good = 0;
  for (std::uint64_t rerun = 0; rerun < 100; ++rerun) {
    Rng data_rng(derive_seed(77, rerun));
    Matrix x(60, 2);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      x(i, 0) = data_rng.uniform();
      x(i, 1) = data_rng.uniform();
      y[i] = 3 * x(i, 0) + 0.05 * data_rng.normal();
    }
    std::vector<std::size_t> rows(60);
    std::iota(rows.begin(), rows.end(), 0);
    const auto sampler = [](Rng& rng) {
      TrainConfig c;
      c.lqr.learning_rate = rng.bernoulli(0.5) ? 1e-9 : rng.log_uniform(0.05, 0.5);
      c.lqr.max_epochs = 150;
      return c;
    };
    const auto scorer = [&](const TrainConfig& c, std::span<const std::size_t> fit, std::span<const std::size_t> val) {
      std::vector<double> yf, yv;
      for (auto i : fit) yf.push_back(y[i]);
      for (auto i : val) yv.push_back(y[i]);
      const auto m = models::train_lqr(x.select_rows(fit), yf, QuantileLevels{}, c.lqr);
      return metrics::aql(yv, models::predict_lqr(m, x.select_rows(val)), QuantileLevels{});
    };
    const auto r = random_search_cv(sampler, scorer, rows, 6, 5, derive_seed(78, rerun));
    good += r.best.lqr.learning_rate >= 0.05;
    CHECK(r.trial_scores.size() == 6);
  }
  CHECK(good >= 95);
}

TEST_CASE("search ties go to the earlier trial and failures score infinity") {
  int calls = 0;
  const auto r = random_search_cv(
      [&](Rng&) { TrainConfig c; c.seed = static_cast<std::uint64_t>(calls++); return c; },
      [](const TrainConfig& c, auto, auto) {
        if (c.seed == 0) throw Error(ErrorCode::Numeric, "boom");
        return 0.5;
      },
      std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 4, 5, 1);
  CHECK(r.best_trial == 1);
  CHECK(std::isinf(r.trial_scores[0]));
}

TEST_CASE("sampled configs stay inside the search ranges") {
  const SearchSpace s;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto l = sample_config(ModelKind::Lqr, s, rng);
    CHECK((l.lqr.l1 >= 1e-4 && l.lqr.l1 <= 1.0));
    const auto x = sample_config(ModelKind::Qxgb, s, rng);
    CHECK((x.qxgb.max_depth >= 3 && x.qxgb.max_depth <= 5));
    CHECK((x.qxgb.rounds >= 50 && x.qxgb.rounds <= 1000));
    CHECK((x.qxgb.colsample >= 0.7 && x.qxgb.colsample <= 0.9));
    CHECK((x.qxgb.learning_rate >= 0.005 && x.qxgb.learning_rate <= 0.1));
    const auto g = sample_config(ModelKind::Qgru, s, rng);
    CHECK((g.qgru.hidden >= 4 && g.qgru.hidden <= 64));
    CHECK((g.qgru.layers >= 1 && g.qgru.layers <= 2));
    CHECK((g.qgru.batch_size >= 8 && g.qgru.batch_size <= 32));
    CHECK((g.qgru.learning_rate >= 1e-4 && g.qgru.learning_rate <= 1e-2));
    const auto e = sample_config(ModelKind::Qgru, embedded_search_space(), rng);
    CHECK(e.qgru.hidden <= 16);
    CHECK(e.qgru.layers == 1);
  }
  SearchSpace bad;
  bad.qxgb_depth = Range{5, 3};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("configs and search spaces round trip through json") {
  Rng rng(6);
  for (auto kind : {ModelKind::Lqr, ModelKind::Qxgb, ModelKind::Qgru}) {
    const auto c = sample_config(kind, SearchSpace{}, rng);
    CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
  }
  const auto s = embedded_search_space();
  CHECK(search_space_to_json(search_space_from_json(search_space_to_json(s))) == search_space_to_json(s));
}

TEST_CASE("harmonized fleet invariants") {
  const auto& f = fleets();
  REQUIRE(f.a.segments.size() > 20);
  REQUIRE(f.b.segments.size() > 10);
  for (const auto* fleet : {&f.a, &f.b})
    for (const auto& s : fleet->segments) {
      CHECK(s.length() >= 100);
      const auto& cur = s.channel(core::ChannelId::BatteryCurrent);
      CHECK(std::any_of(cur.begin(), cur.end(), [](double v) { return v != 0.0; }));
      // voltage arrives in volts even for the mV fleet
      CHECK(s.channel(core::ChannelId::CellVoltage)[0] < 10.0);
    }
  CHECK(f.a.cycles.size() + f.a.cycles_filtered == 30);
}

TEST_CASE("sequence samples") {
  const auto& f = fleets();
  const auto stats = sequence_stats(f.a, 600);
  CHECK(stats.size() == f.a.segments.size());
  CHECK(stats.stats.cols() == 57);
  const auto tensor = sequence_tensor(f.a, harmonize::kAll, 60);
  CHECK(tensor.tensor.n == f.a.segments.size());
  CHECK(tensor.tensor.steps == 60);
  for (std::size_t i = 0; i < stats.size(); ++i) CHECK(stats.labels[i] == f.a.segments[i].label.value());
}

TEST_CASE("subsequences inherit labels and keep order") {
  const auto& f = fleets();
  const auto s = subsequence_tensor(f.a, 600, 20);
  std::size_t expected = 0;
  for (const auto& seg : f.a.segments) expected += seg.length() / 600;
  CHECK(s.size() == expected);
  std::map<std::size_t, std::size_t> next;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.labels[i] == f.a.segments[s.parent[i]].label.value());
    CHECK(s.position[i] == next[s.parent[i]]++);
  }
  std::vector<std::size_t> all(s.size());
  std::iota(all.begin(), all.end(), 0);
  const auto fb = feedback_labels(s, all);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.position[i] == 0) CHECK(fb[i] == 0.0);
    else CHECK(fb[i] == s.labels[i - 1]);
  }
  CHECK_THROWS_AS(subsequence_tensor(f.a, 100000000, 20), Error);
  try {
    subsequence_tensor(f.a, 100000000, 20);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSamples);
  }
}

TEST_CASE("sample splits keep subsequences of one segment together") {
  const auto& f = fleets();
  const auto s = subsequence_tensor(f.a, 600, 20);
  const auto split = split_samples(s, 4);
  std::map<std::size_t, std::set<int>> where;
  int part = 0;
  for (auto* p : {&split.train_ids, &split.val_ids, &split.test_ids}) {
    for (auto id : *p) where[s.parent[id]].insert(part);
    ++part;
  }
  for (auto& [parent, parts] : where) CHECK(parts.size() == 1);
  CHECK(split.train_ids.size() + split.val_ids.size() + split.test_ids.size() == s.size());
}

TEST_CASE("row audit flags leakage within a scope only") {
  RowAudit a;
  const std::vector<std::size_t> tr{1, 2, 3}, te{4, 5}, other{4};
  a.log("x:train", tr);
  a.log("x:test", te);
  a.log("y:train", other);
  CHECK(a.disjoint());
  a.log("x:scaler", other);
  CHECK_FALSE(a.disjoint());
  CHECK(a.to_json().at("disjoint") == false);
}

TEST_CASE("a one-cell grid gives one row") {
  const auto& f = fleets();
  GridSpec g;
  g.sequence_lengths = {3000};
  g.dimreds = {ReducerKind::FReg};
  g.models = {ModelKind::Lqr};
  g.n_trials = {{ModelKind::Lqr, 2}};
  g.seed = 2;
  const auto r = run_sequence_level(f.a, g, SearchSpace{}, QuantileLevels{}, 1);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.failures.empty());
  CHECK(r.rows[0].model == "lqr");
  CHECK(r.rows[0].dimred == "freg");
  CHECK(r.rows[0].size == "3000");
  CHECK(r.rows[0].resample == "-");
  CHECK(std::isfinite(r.rows[0].aql));
  CHECK(r.audit.disjoint());
  CHECK(best_rows(r.rows).size() == 1);
}

TEST_CASE("subsequence grid reports QGRU and QGRU* and fails cleanly on long windows") {
  // every segment cut to 1000 steps, so 6000-step windows cannot exist
  auto short_fleet = fleets().a;
  for (auto& seg : short_fleet.segments)
    for (auto& ch : seg.channels) ch.resize(std::min<std::size_t>(ch.size(), 1000));
  GridSpec g;
  g.subsequence_lengths = {600, 6000};
  g.subsequence_steps = {10};
  g.models = {ModelKind::Qgru};
  g.n_trials = {{ModelKind::Qgru, 1}};
  g.max_train_samples = 200;
  g.seed = 1;
  auto space = embedded_search_space();
  space.qgru_max_epochs = 2;
  space.qgru_hidden = Range{4, 4};
  const auto r = run_subsequence_level(short_fleet, g, space, QuantileLevels{}, true, 1);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].model == "qgru");
  CHECK(r.rows[1].model == "qgru*");
  CHECK(r.failures.size() == 1);
  CHECK(r.audit.disjoint());
}

TEST_CASE("grid spec validation") {
  GridSpec g;
  g.sequence_lengths = {500};
  CHECK_THROWS_AS(g.validate(), Error);
  GridSpec t;
  t.resample_steps = {7};
  CHECK_THROWS_AS(t.validate(), Error);
  CHECK_NOTHROW(GridSpec{}.validate());
}

TEST_CASE("transfer identities") {
  const auto& f = fleets();
  auto spec = small_transfer();
  spec.finetune_epochs = 0;
  TransferStudy study(f.a, f.b, spec);
  const auto zero = study.run(Strategy::ZeroShot, ScalerChoice::Old);
  const auto ft0 = study.run(Strategy::FineTune, ScalerChoice::Old);
  CHECK(ft0.aql == zero.aql);
  const auto bb = study.run(Strategy::Retrain, ScalerChoice::Old);
  CHECK(bb.n_samples == zero.n_samples);
  CHECK(study.audit().disjoint());

  auto nob = small_transfer();
  nob.b_train_fraction = 0.0;
  TransferStudy empty_b(f.a, f.b, nob);
  CHECK(empty_b.run(Strategy::Joint, ScalerChoice::Old).aql == empty_b.run(Strategy::ZeroShot, ScalerChoice::Old).aql);
  CHECK(empty_b.audit().disjoint());
  CHECK_THROWS_AS(empty_b.run(Strategy::Retrain, ScalerChoice::Old), Error);
}

TEST_CASE("transfer run_all gives eight rows against the retrain baseline") {
  const auto& f = fleets();
  TransferStudy study(f.a, f.b, small_transfer());
  const auto rows = study.run_all();
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].strategy == Strategy::Retrain);
  CHECK(rows[0].scaler == ScalerChoice::Old);
  CHECK(rows[0].change_pct == 0.0);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.report.aql));
    CHECK(r.change_pct == doctest::Approx(100.0 * (r.report.aql / rows[0].report.aql - 1.0)));
  }
  CHECK(study.audit().disjoint());
  CHECK(transfer_csv(rows).rfind("strategy,scaler,aql,change_pct,", 0) == 0);
  CHECK(strategy_from_string("ftb") == Strategy::FineTune);
  CHECK_THROWS_AS(strategy_from_string("xy"), Error);
}

TEST_CASE("reports") {
  TempDir dir("report");
  CHECK(report_csv({}) == std::string(kReportHeader) + "\n");
  std::vector<ReportRow> rows{{"none", "lqr", "600", "-", 0.5, 0.01, 0.001, {}},
                              {"pca", "lqr", "All", "-", 0.25, 0.02, 0.002, {}},
                              {"none", "qgru", "All", "240", 0.125, 0.03, 0.003, {}}};
  textio::write_file(dir / "sequence_level.csv", report_csv(rows));
  const auto back = read_report_csv(dir / "sequence_level.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].aql == 0.25);
  CHECK(back[2].resample == "240");
  const auto best = best_rows(rows);
  REQUIRE(best.size() == 2);
  CHECK(best[0].dimred == "pca");

  const auto header = textio::split_fields(kReportHeader);
  CHECK(std::vector<std::string>(header.begin(), header.end()) ==
        std::vector<std::string>{"dimred", "model", "size", "resample", "aql", "rom_mb", "ram_mb"});

  write_fleet_plot_data(fleets().a, dir / "plots");
  auto first_line = [&](const char* name) {
    const auto text = testsupport::slurp(dir / "plots" / name);
    return text.substr(0, text.find('\n'));
  };
  CHECK(first_line("label_histogram.csv") == "bin_lo,bin_hi,count");
  CHECK(first_line("current_range.csv") == "cycle_id,min_current_a,max_current_a");
  CHECK(first_line("rest_voltage_temperature.csv") == "cycle_id,voltage_v,temperature_c");
  CHECK(first_line("duration_histogram.csv") == "bin_lo_h,bin_hi_h,count");

  emit_report(dir.path(), dir / "out");
  CHECK(testsupport::slurp(dir / "out" / "subsequence_level.csv") == std::string(kReportHeader) + "\n");
  CHECK(read_report_csv(dir / "out" / "sequence_best.csv").size() == 2);
  CHECK(std::filesystem::exists(dir / "out" / "plots" / "label_histogram.csv"));
}

TEST_CASE("run config parsing") {
  const auto doc = nlohmann::json::parse(R"({
    "seed": 3, "output_dir": "o",
    "fleets": [{"id": "A", "dir": "fa", "spec": {"preset": "A", "n_cycles": 5}}],
    "grid": {"sequence_lengths": [600, "all"], "resample_steps": [60], "n_trials": 2},
    "transfer": {"strategies": ["ftb/new", "bb/old"], "length": 600, "steps": 60}
  })");
  const auto cfg = run_config_from_json(doc);
  CHECK(cfg.seed == 3);
  REQUIRE(cfg.fleets.size() == 1);
  CHECK(cfg.fleets[0].spec->n_cycles == 5);
  CHECK(cfg.grid.sequence_lengths.size() == 2);
  CHECK_FALSE(cfg.grid.sequence_lengths[1].has_value());
  CHECK(cfg.grid.n_trials.at(ModelKind::Qxgb) == 2);
  REQUIRE(cfg.strategies.size() == 2);
  CHECK(cfg.strategies[0] == std::pair{Strategy::FineTune, ScalerChoice::New});
  const auto again = run_config_from_json(run_config_to_json(cfg));
  CHECK(run_config_to_json(again) == run_config_to_json(cfg));
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"grid": {"sequence_lengths": [7]}})")), Error);
}

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "hystlab/core.hpp"
#include "hystlab/error.hpp"
#include "hystlab/harmonize.hpp"
#include "hystlab/random.hpp"
#include "support.hpp"

using namespace hystlab;
using namespace hystlab::core;
using namespace hystlab::harmonize;
using testsupport::TempDir;

namespace {

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool disjoint_cover(const DataSplit& s, std::size_t n) {
  std::set<std::size_t> all;
  for (auto* part : {&s.train_ids, &s.val_ids, &s.test_ids})
    for (auto id : *part)
      if (!all.insert(id).second) return false;
  return all.size() == n;
}

// 10 Hz cycle built from (duration_s, current) pieces; corrections at the given steps.
DrivingCycle piecewise_cycle(const std::vector<std::pair<double, double>>& pieces,
                             const std::vector<std::size_t>& corrections) {
  DrivingCycle c;
  c.cycle_id = "c0";
  c.native_rate_hz = 10.0;
  std::vector<double> cur;
  for (auto [dur, amps] : pieces)
    for (int k = 0; k < static_cast<int>(std::lround(dur * 10)); ++k) cur.push_back(amps);
  const std::size_t n = cur.size();
  c.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.timestamps[i] = static_cast<double>(i) / 10.0;
  c.channels[0] = cur;
  c.channels[1] = std::vector<double>(n, 3.7);
  c.channels[2] = std::vector<double>(n, 25.0);
  c.soc_correction.assign(n, 0);
  for (auto s : corrections) c.soc_correction.at(s) = 1;
  return c;
}

LabelSource ordinal_labels() {
  return [](std::size_t k) -> std::optional<double> { return 0.1 * static_cast<double>(k % 10); };
}

Segment ramp_segment(std::size_t n) {
  Segment s;
  s.parent_cycle_id = "p";
  for (std::size_t c = 0; c < 3; ++c) {
    s.channels[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) s.channels[c][i] = static_cast<double>(c * 1000 + i);
  }
  return s;
}

}  // namespace

TEST_CASE("split 10 ids gives 8/1/1 and is repeatable") {
  const auto ids = iota_ids(10);
  const auto a = split_dataset(ids, {}, 7);
  CHECK(a.train_ids.size() == 8);
  CHECK(a.val_ids.size() == 1);
  CHECK(a.test_ids.size() == 1);
  CHECK(disjoint_cover(a, 10));
  const auto b = split_dataset(ids, {}, 7);
  CHECK(a.train_ids == b.train_ids);
  CHECK(a.val_ids == b.val_ids);
  CHECK(a.test_ids == b.test_ids);
}

TEST_CASE("split remainder goes to train") {
  const auto s = split_dataset(iota_ids(103), {}, 1);
  CHECK(s.train_ids.size() == 83);
  CHECK(s.val_ids.size() == 10);
  CHECK(s.test_ids.size() == 10);
}

TEST_CASE("split rejects fewer than ten samples") {
  CHECK_THROWS_AS(split_dataset(iota_ids(9), {}, 1), Error);
}

TEST_CASE("split partitions for many sizes and seeds") {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = static_cast<std::size_t>(rng.integer(10, 400));
    const auto s = split_dataset(iota_ids(n), {}, rng.next());
    REQUIRE(disjoint_cover(s, n));
    CHECK(s.val_ids.size() == n / 10);
    CHECK(s.test_ids.size() == n / 10);
  }
}

TEST_CASE("grouped split keeps each group in one part") {
  std::vector<std::size_t> ids, groups;
  for (std::size_t g = 0; g < 30; ++g)
    for (std::size_t k = 0; k <= g % 4; ++k) {
      ids.push_back(ids.size());
      groups.push_back(g);
    }
  const auto s = split_dataset_grouped(ids, groups, {}, 3);
  CHECK(disjoint_cover(s, ids.size()));
  std::map<std::size_t, std::set<int>> where;
  int part = 0;
  for (auto* p : {&s.train_ids, &s.val_ids, &s.test_ids}) {
    for (auto id : *p) where[groups[id]].insert(part);
    ++part;
  }
  for (auto& [g, parts] : where) CHECK(parts.size() == 1);
}

TEST_CASE("quantile levels and labels validate") {
  CHECK_THROWS_AS(HysteresisLabel(1.5), Error);
  CHECK_NOTHROW(HysteresisLabel(-1.0));
  CHECK_THROWS_AS(QuantileLevels({0.5, 0.05}), Error);
  CHECK_THROWS_AS(QuantileLevels({0.0, 0.5}), Error);
  QuantileLevels q;
  CHECK(q.size() == 3);
  CHECK(q.median_index() == 1);
}

TEST_CASE("load_fleet skips bad files and keeps partial channels") {
  TempDir dir("load");
  testsupport::spit(dir / "good.csv",
                    "t_s,battery_current,cell_voltage,cell_temperature,soc_correction\n"
                    "0.0,1.0,3700,20,0\n1.0,2.0,3701,20,1\n2.0,3.0,3702,21,0\n");
  testsupport::spit(dir / "dup.csv",
                    "t_s,battery_current,cell_voltage,cell_temperature,soc_correction\n"
                    "0.0,1,3.7,20,0\n0.0,1,3.7,20,0\n0.1,1,3.7,20,0\n");
  testsupport::spit(dir / "novolt.csv",
                    "t_s,battery_current,cell_temperature,soc_correction\n"
                    "0,1,20,0\n1,1,20,0\n2,1,20,0\n3,1,20,0\n4,1,20,1\n");
  testsupport::spit(dir / "manifest.json",
                    R"({"fleet_id":"X","files":[)"
                    R"({"path":"good.csv","units":{"battery_current":"A","cell_voltage":"mV","cell_temperature":"degC"}},)"
                    R"({"path":"dup.csv","units":{"battery_current":"A","cell_voltage":"V","cell_temperature":"degC"}},)"
                    R"({"path":"novolt.csv","units":{"battery_current":"A","cell_temperature":"degC"}},)"
                    R"({"path":"missing.csv","units":{"battery_current":"A"}}]})");
  const auto m = read_manifest(dir / "manifest.json");
  const auto load = load_fleet(m, 2);
  REQUIRE(load.cycles.size() == 2);
  CHECK(load.errors.size() == 2);
  CHECK(load.cycles[0].cycle.cycle_id == "good");
  CHECK(load.cycles[0].cycle.channel(ChannelId::CellVoltage)[1] == 3701.0);  // not converted yet
  CHECK(load.cycles[0].units.at(ChannelId::CellVoltage) == UnitTag::mV);
  CHECK_FALSE(load.cycles[1].cycle.has(ChannelId::CellVoltage));
  CHECK(load.cycles[1].cycle.length() == 5);

  const auto again = load_fleet(m, 1);
  CHECK(again.cycles[0].cycle == load.cycles[0].cycle);
  CHECK(again.cycles[1].cycle == load.cycles[1].cycle);

  const auto std_cycle = standardize_units(load.cycles[0].cycle, load.cycles[0].units);
  CHECK(std_cycle.channel(ChannelId::CellVoltage)[1] == doctest::Approx(3.701).epsilon(1e-15));
  CHECK(std_cycle.channel(ChannelId::BatteryCurrent)[2] == 3.0);

  std::vector<DrivingCycle> cs{load.cycles[0].cycle, load.cycles[1].cycle};
  const auto kept = filter_cycles(cs);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].cycle_id == "good");
}

TEST_CASE("cycle csv round trip") {
  TempDir dir("csv");
  auto c = piecewise_cycle({{2.0, 1.25}, {1.0, -0.5}}, {5});
  c.channels[1].reset();
  write_cycle_csv(c, dir / "x.csv");
  const auto back = read_cycle_csv(dir / "x.csv", c.cycle_id);
  CHECK(back.timestamps == c.timestamps);
  CHECK(back.channels == c.channels);
  CHECK(back.soc_correction == c.soc_correction);
}

TEST_CASE("resample to 10 Hz interpolates linearly and keeps corrections") {
  DrivingCycle c;
  c.cycle_id = "r";
  c.timestamps = {0.0, 1.0, 2.0, 3.0};
  c.channels[0] = std::vector<double>{0.0, 10.0, 20.0, 0.0};
  c.channels[1] = std::vector<double>{3.0, 3.0, 3.0, 3.0};
  c.channels[2] = std::vector<double>{20.0, 21.0, 22.0, 23.0};
  c.soc_correction = {0, 1, 0, 1};
  const auto r = resample_to_10hz(c);
  REQUIRE(r.length() == 31);
  CHECK(r.channel(ChannelId::BatteryCurrent)[5] == doctest::Approx(5.0));
  CHECK(r.channel(ChannelId::BatteryCurrent)[10] == 10.0);
  CHECK(r.channel(ChannelId::BatteryCurrent)[25] == doctest::Approx(10.0));
  CHECK(r.channel(ChannelId::CellTemperature)[30] == 23.0);
  CHECK(r.soc_correction[10] == 1);
  CHECK(r.soc_correction[30] == 1);
  CHECK(std::count(r.soc_correction.begin(), r.soc_correction.end(), 1) == 2);
}

TEST_CASE("segmentation follows the rest-correction-correction pattern") {
  // rest 700 s, correction, drive 800 s, rest 700 s, correction, drive, rest, no closing correction
  const std::size_t c1 = 7000 - 1, c2 = 7000 + 8000 + 7000 - 1;
  const auto cyc = piecewise_cycle({{700, 0.0}, {800, 40.0}, {700, 0.0}, {300, -20.0}, {900, 0.0}}, {c1, c2});
  const auto segs = segment_cycle(cyc, SegmentationPolicy{}, ordinal_labels());
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_step == c1 + 1);
  CHECK(segs[0].length() == c2 - c1);
  CHECK(segs[0].closing_correction == 1);
  CHECK(segs[0].label.value() == doctest::Approx(0.1));
}

TEST_CASE("segmentation drops short, idle and unlabelled candidates") {
  SegmentationPolicy p;
  p.relax_min_duration_s = 60;
  SUBCASE("8 s candidate") {
    const auto cyc = piecewise_cycle({{70, 0.0}, {8, 5.0}, {10, 0.0}}, {699, 699 + 80});
    CHECK(segment_cycle(cyc, p, ordinal_labels()).empty());
  }
  SUBCASE("zero current throughout") {
    const auto cyc = piecewise_cycle({{70, 0.0}, {200, 0.0}}, {699, 699 + 1000});
    CHECK(segment_cycle(cyc, p, ordinal_labels()).empty());
  }
  SUBCASE("rest too short before the opening correction") {
    const auto cyc = piecewise_cycle({{50, 0.0}, {60, 5.0}, {10, 0.0}}, {499, 1199});
    CHECK(segment_cycle(cyc, p, ordinal_labels()).empty());
  }
  SUBCASE("no label for the closing correction") {
    const auto cyc = piecewise_cycle({{70, 0.0}, {60, 5.0}, {10, 0.0}}, {699, 1399});
    CHECK(segment_cycle(cyc, p, [](std::size_t) { return std::optional<double>{}; }).empty());
    CHECK(segment_cycle(cyc, p, ordinal_labels()).size() == 1);
  }
}

TEST_CASE("segmentation invariants on random cycles") {
  Rng rng(11);
  SegmentationPolicy p;
  p.relax_min_duration_s = 5;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<double, double>> pieces;
    for (int k = 0; k < 30; ++k) {
      const double amps = rng.bernoulli(0.4) ? 0.0 : rng.uniform(-50, 50);
      pieces.emplace_back(0.1 * static_cast<double>(rng.integer(1, 200)), amps);
    }
    auto cyc = piecewise_cycle(pieces, {});
    for (std::size_t i = 0; i < cyc.length(); ++i) cyc.soc_correction[i] = rng.bernoulli(0.01);
    for (const auto& s : segment_cycle(cyc, p, ordinal_labels())) {
      CHECK(s.length() >= 100);
      const auto& cur = s.channel(ChannelId::BatteryCurrent);
      CHECK(std::any_of(cur.begin(), cur.end(), [](double v) { return v != 0.0; }));
    }
  }
}

TEST_CASE("truncate_last keeps the final steps") {
  std::vector<Segment> segs{ramp_segment(5000), ramp_segment(300)};
  const auto t = truncate_last(segs, 600);
  CHECK(t[0].length() == 600);
  CHECK(t[0].channels[0].front() == 4400.0);
  CHECK(t[0].channels[0].back() == 4999.0);
  CHECK(t[1].length() == 300);
  const auto all = truncate_last(segs, kAll);
  CHECK(all[0].channels == segs[0].channels);
}

TEST_CASE("split_subsequences drops the trailing partial window") {
  auto seg = ramp_segment(13000);
  seg.label = HysteresisLabel(0.25);
  const auto subs = split_subsequences(seg, 6000);
  REQUIRE(subs.size() == 2);
  CHECK(subs[0].channels[0].front() == 0.0);
  CHECK(subs[1].channels[0].front() == 6000.0);
  CHECK(subs[1].length() == 6000);
  for (const auto& s : subs) CHECK(s.label.value() == 0.25);
}

TEST_CASE("statistics on hand examples") {
  const auto& names = statistic_names();
  auto at = [&](const std::array<double, kStatCount>& v, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    REQUIRE(it != names.end());
    return v[static_cast<std::size_t>(it - names.begin())];
  };
  const std::vector<double> x{1, -2, 3};
  const auto s = compute_statistics(x);
  CHECK(at(s, "sum_of_absolute_changes") == 8.0);
  CHECK(at(s, "mean_of_changes") == 1.0);
  CHECK(at(s, "absolute_energy") == 14.0);
  CHECK(at(s, "root_mean_square") == doctest::Approx(std::sqrt(14.0 / 3.0)));
  CHECK(at(s, "sum_of_positive_values") == 4.0);
  CHECK(at(s, "mean_of_positive_values") == 2.0);
  CHECK(at(s, "first_value") == 1.0);
  CHECK(at(s, "last_value") == 3.0);

  const std::vector<double> z{0, 0, 0};
  const auto sz = compute_statistics(z);
  CHECK(at(sz, "number_of_zeros") == 3.0);
  CHECK(at(sz, "mean_of_negative_values") == 0.0);
  CHECK(at(sz, "absolute_energy") == 0.0);
  CHECK(at(sz, "mean") == 0.0);

  const std::vector<double> c(7, -2.5);
  const auto sc = compute_statistics(c);
  CHECK(at(sc, "sum_of_absolute_changes") == 0.0);
  CHECK(at(sc, "complexity") == 0.0);
  CHECK(at(sc, "minimum") == -2.5);
  CHECK(at(sc, "maximum") == -2.5);

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(compute_statistics(one), Error);
}

TEST_CASE("statistics match brute force on random vectors") {
  Rng rng(2024);
  for (int rep = 0; rep < 300; ++rep) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 300));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.bernoulli(0.1) ? 0.0 : rng.normal(0, 10);
    const auto got = compute_statistics(x);
    const auto want = testsupport::brute_force_statistics(x);
    for (std::size_t k = 0; k < kStatCount; ++k) CHECK(testsupport::close_rel(got[k], want[k], 1e-9));
  }
}

TEST_CASE("stat matrix layout is channel-major") {
  std::vector<Segment> segs{ramp_segment(50), ramp_segment(20)};
  const auto m = extract_stat_features(segs);
  CHECK(m.values.rows() == 2);
  CHECK(m.values.cols() == 57);
  CHECK(m.feature_names.size() == 57);
  CHECK(m.values(0, 19) == 1000.0);  // min of the voltage channel
  CHECK(m.values(1, 2 * 19 + 18) == 2019.0);  // last temperature value
}

TEST_CASE("fixed-T resampling") {
  Segment s;
  for (auto& ch : s.channels) {
    ch.resize(100);
    for (std::size_t i = 0; i < 100; ++i) ch[i] = static_cast<double>(i) / 99.0;
  }
  std::vector<Segment> one{s};
  const auto t = resample_fixed_T(one, 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(t.at(0, k, 1) == doctest::Approx(0.25 * double(k)).epsilon(1e-12));
  const auto same = resample_fixed_T(one, 100);
  for (std::size_t k = 0; k < 100; ++k) CHECK(same.at(0, k, 2) == s.channels[2][k]);
  CHECK_THROWS_AS(resample_fixed_T(one, 1), Error);

  Rng rng(3);
  std::vector<double> x(37);
  for (auto& v : x) v = rng.normal();
  for (std::size_t T : {2u, 10u, 60u, 240u}) {
    const auto r = resample_series(x, T);
    CHECK(r.front() == x.front());
    CHECK(r.back() == x.back());
  }
}

TEST_CASE("min-max scaling") {
  Matrix m(3, 2, std::vector<double>{2, 5, 4, 5, 6, 5});
  const std::vector<std::size_t> rows{0, 1, 2};
  const auto p = fit_minmax(m, rows);
  CHECK(p.min == std::vector<double>{2, 5});
  CHECK(p.max == std::vector<double>{6, 5});
  const auto s = apply_minmax(m, p);
  CHECK(s(1, 0) == 0.5);
  CHECK(s(2, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  Matrix out(1, 2, std::vector<double>{8, 9});
  CHECK(apply_minmax(out, p)(0, 0) == 1.5);

  const std::vector<std::size_t> first{0};
  const auto single = fit_minmax(m, first);
  CHECK(single.min == single.max);

  SeqTensor t(2, 3, 1);
  t.values = {0, -10, 5, 50, 3, 2};
  const std::vector<std::size_t> both{0, 1};
  const auto tp = fit_minmax(t, both);
  CHECK(tp.min[0] == -10);
  CHECK(tp.max[0] == 50);

  Matrix wrong(1, 3);
  CHECK_THROWS_AS(apply_minmax(wrong, p), Error);
}

TEST_CASE("scaled fitting rows span exactly [0, 1]") {
  Rng rng(9);
  Matrix m(40, 5);
  for (auto& v : m.data()) v = rng.normal(3, 7);
  const auto rows = iota_ids(40);
  const auto s = apply_minmax(m, fit_minmax(m, rows));
  for (std::size_t c = 0; c < 5; ++c) {
    const auto col = s.column(c);
    CHECK(*std::min_element(col.begin(), col.end()) == 0.0);
    CHECK(*std::max_element(col.begin(), col.end()) == 1.0);
  }
}

TEST_CASE("harmonized artifacts round trip") {
  TempDir dir("art");
  std::vector<Segment> segs{ramp_segment(30), ramp_segment(12)};
  const auto m = extract_stat_features(segs);
  write_stat_matrix_csv(m, dir / "stats.csv");
  const auto back = read_stat_matrix_csv(dir / "stats.csv");
  CHECK(back.values == m.values);
  CHECK(back.feature_names == m.feature_names);

  const auto t = resample_fixed_T(segs, 7);
  write_seq_tensor(t, dir / "t.bin", dir / "t.json");
  CHECK(std::filesystem::file_size(dir / "t.bin") == 2 * 7 * 3 * 8);
  CHECK(read_seq_tensor(dir / "t.bin", dir / "t.json") == t);

  const std::vector<std::size_t> rows{0, 1};
  const auto p = fit_minmax(m.values, rows);
  const auto q = scaler_from_json(scaler_to_json(p));
  CHECK(q.min == p.min);
  CHECK(q.max == p.max);
}

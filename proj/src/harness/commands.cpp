#include "hystlab/commands.hpp"

#include <algorithm>
#include <sstream>

#include "hystlab/textio.hpp"

namespace hystlab::commands {

namespace fs = std::filesystem;
using nlohmann::json;
using harness::FeatureKind;
using harness::SampleSet;

namespace {

std::string required(const json& o, const char* key) {
  require(o.contains(key) && o.at(key).is_string() && !o.at(key).get<std::string>().empty(), ErrorCode::InvalidArgument,
          std::string("missing --") + key);
  return o.at(key).get<std::string>();
}

// Rejects keys a command does not understand; "seed" and "out" are common to all.
void only(const json& o, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : o.items()) {
    if (k == "seed" || k == "out") continue;
    const bool known = std::any_of(keys.begin(), keys.end(), [&k](const char* x) { return k == x; });
    require(known, ErrorCode::InvalidArgument, "unknown option --" + k);
  }
}

std::optional<std::uint64_t> seed_of(const json& o) {
  if (!o.contains("seed") || o.at("seed").is_null()) return std::nullopt;
  return o.at("seed").get<std::uint64_t>();
}

unsigned threads_of(const json& o) {
  return o.contains("threads") && !o.at("threads").is_null() ? o.at("threads").get<unsigned>() : 0u;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

harmonize::WindowLength length_option(const json& o) {
  if (!o.contains("L") || o.at("L").is_null()) return harmonize::kAll;
  const auto& v = o.at("L");
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  const auto s = v.get<std::string>();
  if (s == "all" || s == "All") return harmonize::kAll;
  std::size_t n = 0;
  std::istringstream in(s);
  require(static_cast<bool>(in >> n) && in.eof() && n > 0, ErrorCode::InvalidArgument,
          "--L must be a positive integer or 'all'");
  return n;
}

const char* split_name(std::size_t i, const core::DataSplit& s) {
  auto in = [i](const std::vector<std::size_t>& v) { return std::binary_search(v.begin(), v.end(), i); };
  if (in(s.test_ids)) return "test";
  if (in(s.val_ids)) return "val";
  return "train";
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

harness::RunConfig load_run_config(const json& o) {
  auto cfg = harness::read_run_config(required(o, "config"));
  if (o.contains("out") && o.at("out").is_string() && !o.at("out").get<std::string>().empty())
    cfg.output_dir = o.at("out").get<std::string>();
  if (auto s = seed_of(o)) {
    cfg.seed = *s;
    cfg.grid.seed = *s;
    cfg.transfer.seed = *s;
    cfg.transfer.config.seed = *s;
  }
  if (const auto t = threads_of(o)) cfg.threads = t;
  return cfg;
}

std::vector<double> pick(const std::vector<double>& v, std::span<const std::size_t> rows) {
  std::vector<double> out;
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

}  // namespace

json generate(const json& o) {
  only(o, {"spec", "preset", "n_cycles", "threads"});
  const fs::path out = required(o, "out");
  synthdata::FleetSpec spec;
  if (o.contains("spec") && o.at("spec").is_string()) spec = synthdata::read_spec(o.at("spec").get<std::string>());
  else spec = synthdata::spec_from_json(json{{"preset", o.value("preset", "A")}});
  if (auto s = seed_of(o)) spec.seed = *s;
  if (o.contains("n_cycles") && !o.at("n_cycles").is_null()) spec.n_cycles = o.at("n_cycles").get<std::size_t>();
  spec.validate();
  const auto sum = synthdata::generate_fleet(spec, out, threads_of(o));
  return {{"fleet_id", spec.fleet_id},
          {"n_cycles", sum.n_cycles},
          {"n_corrections", sum.n_corrections},
          {"mean_duration_hours", sum.mean_duration_hours}};
}

json harmonize(const json& o) {
  only(o, {"fleet", "mode", "L", "T", "relax_min_s", "relax_threshold", "threads"});
  const fs::path fleet_dir = required(o, "fleet");
  const fs::path out = required(o, "out");
  const std::string mode = o.value("mode", "stats");
  require(mode == "stats" || mode == "tensor", ErrorCode::InvalidArgument, "--mode must be stats or tensor");
  const auto length = length_option(o);
  const std::size_t steps = o.value("T", std::size_t{60});
  const std::uint64_t seed = seed_of(o).value_or(0);

  harmonize::SegmentationPolicy policy;
  if (o.contains("relax_min_s") && !o.at("relax_min_s").is_null())
    policy.relax_min_duration_s = o.at("relax_min_s").get<double>();
  if (o.contains("relax_threshold") && !o.at("relax_threshold").is_null())
    policy.relax_current_threshold_a = o.at("relax_threshold").get<double>();

  const auto fleet = harness::harmonize_fleet(fleet_dir, policy, threads_of(o));
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet produced no labelled segments");
  const SampleSet s = mode == "stats" ? harness::sequence_stats(fleet, length)
                                      : harness::sequence_tensor(fleet, length, steps);
  const auto split = harness::split_samples(s, seed);

  make_dir(out);
  std::string rows = "sample_id,cycle_id,segment,position,label,split\n";
  const auto train = sorted(split.train_ids);
  auto sp = split;
  sp.train_ids = train;
  sp.val_ids = sorted(split.val_ids);
  sp.test_ids = sorted(split.test_ids);
  for (std::size_t i = 0; i < s.size(); ++i)
    rows += std::to_string(i) + "," + fleet.segments[s.parent[i]].parent_cycle_id + "," + std::to_string(s.parent[i]) +
            "," + std::to_string(s.position[i]) + "," + textio::format_double(s.labels[i]) + "," + split_name(i, sp) +
            "\n";
  textio::write_file(out / "samples.csv", rows);

  harmonize::MinMaxScalerParams scaler;
  if (mode == "stats") {
    harmonize::write_stat_matrix_csv({s.stats, s.feature_names}, out / "stats.csv");
    scaler = harmonize::fit_minmax(s.stats, train);
  } else {
    harmonize::write_seq_tensor(s.tensor, out / "tensor.bin", out / "tensor.json");
    scaler = harmonize::fit_minmax(s.tensor, train);
  }
  scaler.fitted_on = "train";
  textio::write_file(out / "scaler.json", harmonize::scaler_to_json(scaler).dump(2) + "\n");

  json errors = json::array();
  for (const auto& e : fleet.errors) errors.push_back({{"path", e.path}, {"message", e.message}});
  json meta{{"fleet_id", fleet.fleet_id},
            {"mode", mode},
            {"L", length ? json(*length) : json("all")},
            {"T", mode == "tensor" ? json(steps) : json(nullptr)},
            {"seed", seed},
            {"segmentation",
             {{"relax_current_threshold_a", policy.relax_current_threshold_a},
              {"relax_min_duration_s", policy.relax_min_duration_s}}},
            {"n_samples", s.size()},
            {"n_train", split.train_ids.size()},
            {"n_val", split.val_ids.size()},
            {"n_test", split.test_ids.size()},
            {"cycles", fleet.cycles.size()},
            {"cycles_filtered", fleet.cycles_filtered},
            {"errors", errors}};
  textio::write_file(out / "harmonize.json", meta.dump(2) + "\n");
  return meta;
}

HarmonizedData read_harmonized(const fs::path& dir) {
  HarmonizedData d;
  try {
    d.meta = json::parse(textio::read_file(dir / "harmonize.json"));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, (dir / "harmonize.json").string() + ": " + e.what());
  }
  const std::string mode = d.meta.value("mode", "");
  require(mode == "stats" || mode == "tensor", ErrorCode::Format, dir.string() + ": unknown data mode '" + mode + "'");
  auto& s = d.samples;
  if (mode == "stats") {
    s.kind = FeatureKind::Stats;
    auto m = harmonize::read_stat_matrix_csv(dir / "stats.csv");
    s.stats = std::move(m.values);
    s.feature_names = std::move(m.feature_names);
  } else {
    s.kind = FeatureKind::Tensor;
    s.tensor = harmonize::read_seq_tensor(dir / "tensor.bin", dir / "tensor.json");
  }

  std::istringstream in(textio::read_file(dir / "samples.csv"));
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = textio::split_fields(line);
    const std::string where = (dir / "samples.csv").string() + ":" + std::to_string(lineno);
    require(f.size() == 6, ErrorCode::Parse, where + ": expected 6 fields");
    double label = 0.0, seg = 0.0, pos = 0.0;
    require(textio::parse_double(f[4], label) && textio::parse_double(f[2], seg) && textio::parse_double(f[3], pos),
            ErrorCode::Parse, where + ": bad number");
    const std::size_t i = s.labels.size();
    s.labels.push_back(label);
    s.parent.push_back(static_cast<std::size_t>(seg));
    s.position.push_back(static_cast<std::size_t>(pos));
    d.cycle_ids.emplace_back(f[1]);
    if (f[5] == "train") d.split.train_ids.push_back(i);
    else if (f[5] == "val") d.split.val_ids.push_back(i);
    else if (f[5] == "test") d.split.test_ids.push_back(i);
    else fail(ErrorCode::Parse, where + ": unknown split '" + std::string(f[5]) + "'");
  }
  const std::size_t n = s.kind == FeatureKind::Stats ? s.stats.rows() : s.tensor.n;
  require(n == s.labels.size(), ErrorCode::DimensionMismatch, dir.string() + ": samples.csv and features disagree");
  return d;
}

harness::Pipeline pipeline_from(const models::LoadedModel& loaded) {
  harness::Pipeline p;
  p.model = loaded.model;
  const auto& pipe = loaded.pipeline;
  require(pipe.is_object() && pipe.contains("scaler"), ErrorCode::Format, "model file has no pipeline state");
  p.scaler = harmonize::scaler_from_json(pipe.at("scaler"));
  if (pipe.contains("reducer")) p.reducer = dimred::reducer_from_json(pipe.at("reducer"));
  p.features = pipe.value("features", "stats") == "tensor" ? FeatureKind::Tensor : FeatureKind::Stats;
  return p;
}

json train(const json& o) {
  only(o, {"model", "dimred", "config", "data"});
  const fs::path data_dir = required(o, "data");
  const fs::path out = required(o, "out");
  harness::TrainConfig cfg;
  if (o.contains("config") && o.at("config").is_string() && !o.at("config").get<std::string>().empty()) {
    const fs::path path = o.at("config").get<std::string>();
    try {
      cfg = harness::config_from_json(json::parse(textio::read_file(path)));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Parse, path.string() + ": " + e.what());
    }
  }
  if (o.contains("model") && o.at("model").is_string()) cfg.kind = models::model_kind_from_string(o.at("model").get<std::string>());
  if (o.contains("dimred") && o.at("dimred").is_string())
    cfg.reducer.kind = dimred::reducer_kind_from_string(o.at("dimred").get<std::string>());
  if (auto s = seed_of(o)) cfg.seed = *s;

  const auto data = read_harmonized(data_dir);
  const auto& sp = data.split;
  harness::Pipeline p;
  if (cfg.kind == models::ModelKind::Qgru) {
    p = harness::fit_pipeline(data.samples, sp.train_ids, sp.val_ids, cfg, {});
  } else {
    auto rows = sp.train_ids;
    rows.insert(rows.end(), sp.val_ids.begin(), sp.val_ids.end());
    std::sort(rows.begin(), rows.end());
    p = harness::fit_pipeline(data.samples, rows, {}, cfg, {});
  }
  json extra = p.state_json();
  extra["data"] = {{"mode", data.meta.value("mode", "")}, {"L", data.meta.value("L", json(nullptr))},
                   {"T", data.meta.value("T", json(nullptr))}};
  extra["config"] = harness::config_to_json(cfg);
  if (out.has_parent_path()) make_dir(out.parent_path());
  models::save_model(p.model, out, extra);
  return {{"model", models::to_string(cfg.kind)},
          {"dimred", dimred::to_string(cfg.reducer.kind)},
          {"rom_mb", metrics::rom_mb(p.model, extra)},
          {"ram_mb", metrics::ram_mb(p.model, p.input_shape(data.samples))},
          {"path", out.string()}};
}

json evaluate(const json& o) {
  only(o, {"model", "data", "split", "oracle_debug"});
  const fs::path model_path = required(o, "model");
  const fs::path data_dir = required(o, "data");
  const fs::path out = required(o, "out");
  const std::string split = o.value("split", "test");
  const bool oracle = o.value("oracle_debug", false);

  const auto loaded = models::load_model(model_path);
  const auto p = pipeline_from(loaded);
  const auto data = read_harmonized(data_dir);
  require(data.samples.kind == p.features, ErrorCode::InvalidArgument,
          "model expects " + std::string(p.features == FeatureKind::Stats ? "stats" : "tensor") + " data");

  std::vector<std::size_t> rows;
  if (split == "test") rows = data.split.test_ids;
  else if (split == "val") rows = data.split.val_ids;
  else if (split == "train") rows = data.split.train_ids;
  else if (split == "all") {
    rows.resize(data.samples.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    fail(ErrorCode::InvalidArgument, "--split must be train, val, test or all");
  }
  require(!rows.empty(), ErrorCode::NoSamples, "the " + split + " split is empty");

  const auto& q = models::quantiles_of(loaded.model);
  const auto y = pick(data.samples.labels, rows);
  Matrix pred(rows.size(), q.size());
  if (oracle) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < q.size(); ++k) pred(i, k) = y[i];
  } else {
    pred = models::repair_quantile_crossing(p.predict(data.samples, rows));
  }
  const auto rep = metrics::evaluate(y, pred, q, static_cast<double>(loaded.file_bytes) / metrics::kBytesPerMb,
                                     metrics::ram_mb(loaded.model, p.input_shape(data.samples)));
  json doc = metrics::to_json(rep);
  doc["split"] = split;
  doc["model"] = models::to_string(models::kind_of(loaded.model));
  doc["oracle_debug"] = oracle;
  if (out.has_parent_path()) make_dir(out.parent_path());
  textio::write_file(out, doc.dump(2) + "\n");
  return doc;
}

json grid(const json& o) {
  only(o, {"config", "threads"});
  const auto cfg = load_run_config(o);
  harness::run_grid(cfg);
  json out{{"output_dir", cfg.output_dir.string()}};
  for (const char* t : {"sequence_best.csv", "subsequence_best.csv"}) {
    const auto path = cfg.output_dir / t;
    if (!fs::exists(path)) continue;
    json rows = json::array();
    for (const auto& r : harness::read_report_csv(path))
      rows.push_back({{"model", r.model}, {"dimred", r.dimred}, {"size", r.size}, {"resample", r.resample}, {"aql", r.aql}});
    out[std::string(t).substr(0, std::string(t).size() - 4)] = rows;
  }
  return out;
}

json transfer(const json& o) {
  only(o, {"config", "strategy", "scaler", "threads"});
  const auto cfg = load_run_config(o);
  std::optional<harness::Strategy> strategy;
  std::optional<harness::ScalerChoice> scaler;
  if (o.contains("strategy") && o.at("strategy").is_string())
    strategy = harness::strategy_from_string(o.at("strategy").get<std::string>());
  if (o.contains("scaler") && o.at("scaler").is_string())
    scaler = harness::scaler_from_string(o.at("scaler").get<std::string>());
  require(!scaler || strategy, ErrorCode::InvalidArgument, "--scaler needs --strategy");
  const auto rows = harness::run_transfer_cmd(cfg, strategy, scaler);
  json cells = json::array();
  for (const auto& r : rows)
    cells.push_back({{"strategy", harness::to_string(r.strategy)},
                     {"scaler", harness::to_string(r.scaler)},
                     {"aql", r.report.aql},
                     {"change_pct", r.change_pct}});
  return {{"output_dir", cfg.output_dir.string()}, {"cells", cells}};
}

json report(const json& o) {
  only(o, {"in"});
  const fs::path in = required(o, "in");
  const fs::path out = required(o, "out");
  harness::emit_report(in, out);
  return {{"output_dir", out.string()}};
}

}  // namespace hystlab::commands

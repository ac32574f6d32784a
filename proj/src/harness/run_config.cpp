#include <algorithm>
#include <iostream>

#include "hystlab/harness.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json length_json(const WindowLength& l) { return l ? json(*l) : json("all"); }

WindowLength length_from(const json& v) {
  if (v.is_string()) {
    auto s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    require(s == "all", ErrorCode::Parse, "window length must be a number or \"all\"");
    return harmonize::kAll;
  }
  return v.get<std::size_t>();
}

json grid_to_json(const GridSpec& g) {
  json lengths = json::array(), dimreds = json::array(), models = json::array(), trials = json::object();
  for (const auto& l : g.sequence_lengths) lengths.push_back(length_json(l));
  for (auto d : g.dimreds) dimreds.push_back(dimred::to_string(d));
  for (auto m : g.models) models.push_back(models::to_string(m));
  for (const auto& [k, n] : g.n_trials) trials[models::to_string(k)] = n;
  return {{"sequence_lengths", lengths},
          {"resample_steps", g.resample_steps},
          {"dimreds", dimreds},
          {"models", models},
          {"n_trials", trials},
          {"cv_folds", g.cv_folds},
          {"pca_variance", g.pca_variance},
          {"freg_k", g.freg_k},
          {"subsequence_lengths", g.subsequence_lengths},
          {"subsequence_steps", g.subsequence_steps},
          {"autoregressive", g.autoregressive},
          {"max_train_samples", g.max_train_samples},
          {"seed", g.seed}};
}

GridSpec grid_from_json(const json& doc, std::uint64_t seed) {
  GridSpec g;
  g.seed = seed;
  if (doc.contains("sequence_lengths")) {
    g.sequence_lengths.clear();
    for (const auto& v : doc.at("sequence_lengths")) g.sequence_lengths.push_back(length_from(v));
  }
  if (doc.contains("resample_steps")) g.resample_steps = doc.at("resample_steps").get<std::vector<std::size_t>>();
  if (doc.contains("dimreds")) {
    g.dimreds.clear();
    for (const auto& v : doc.at("dimreds")) g.dimreds.push_back(dimred::reducer_kind_from_string(v.get<std::string>()));
  }
  if (doc.contains("models")) {
    g.models.clear();
    for (const auto& v : doc.at("models")) g.models.push_back(models::model_kind_from_string(v.get<std::string>()));
  }
  if (doc.contains("n_trials")) {
    const auto& t = doc.at("n_trials");
    if (t.is_number()) {
      for (auto& [k, n] : g.n_trials) n = t.get<std::size_t>();
    } else {
      for (const auto& [k, v] : t.items()) g.n_trials[models::model_kind_from_string(k)] = v.get<std::size_t>();
    }
  }
  g.cv_folds = doc.value("cv_folds", g.cv_folds);
  g.pca_variance = doc.value("pca_variance", g.pca_variance);
  g.freg_k = doc.value("freg_k", g.freg_k);
  if (doc.contains("subsequence_lengths"))
    g.subsequence_lengths = doc.at("subsequence_lengths").get<std::vector<std::size_t>>();
  if (doc.contains("subsequence_steps")) g.subsequence_steps = doc.at("subsequence_steps").get<std::vector<std::size_t>>();
  g.autoregressive = doc.value("autoregressive", g.autoregressive);
  g.max_train_samples = doc.value("max_train_samples", g.max_train_samples);
  g.seed = doc.value("seed", g.seed);
  g.validate();
  return g;
}

std::pair<Strategy, ScalerChoice> cell_from(const std::string& s) {
  const auto cut = s.find('/');
  require(cut != std::string::npos, ErrorCode::Parse, "strategy cell '" + s + "' must look like \"ftb/new\"");
  return {strategy_from_string(s.substr(0, cut)), scaler_from_string(s.substr(cut + 1))};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

const FleetSource& source(const RunConfig& cfg, const std::string& id) {
  for (const auto& f : cfg.fleets)
    if (f.id == id) return f;
  fail(ErrorCode::InvalidArgument, "run configuration has no fleet '" + id + "'");
}

unsigned threads_of(const RunConfig& cfg) { return cfg.threads ? cfg.threads : core::worker_threads(); }

std::string failures_csv(std::span<const CellFailure> failures) {
  std::string out = "cell,message\n";
  for (const auto& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += f.cell + "," + msg + "\n";
  }
  return out;
}

json rows_json(std::span<const ReportRow> rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"dimred", r.dimred}, {"model", r.model}, {"size", r.size}, {"resample", r.resample},
                   {"aql", r.aql}, {"rom_mb", r.rom_mb}, {"ram_mb", r.ram_mb}, {"config", r.config}});
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg;
  try {
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    cfg.threads = doc.value("threads", cfg.threads);
    if (doc.contains("quantiles")) cfg.quantiles = QuantileLevels(doc.at("quantiles").get<std::vector<double>>());
    if (doc.contains("segmentation")) {
      const auto& s = doc.at("segmentation");
      cfg.segmentation.relax_current_threshold_a =
          s.value("relax_current_threshold_a", cfg.segmentation.relax_current_threshold_a);
      cfg.segmentation.relax_min_duration_s = s.value("relax_min_duration_s", cfg.segmentation.relax_min_duration_s);
    }
    if (doc.contains("fleets")) {
      for (const auto& f : doc.at("fleets")) {
        FleetSource src;
        src.id = f.at("id").get<std::string>();
        src.dir = f.value("dir", "fleet_" + src.id);
        if (f.contains("spec")) {
          const auto& sp = f.at("spec");
          src.spec = sp.is_string() ? synthdata::read_spec(sp.get<std::string>()) : synthdata::spec_from_json(sp);
          src.spec->fleet_id = src.id;
        }
        cfg.fleets.push_back(std::move(src));
      }
    }
    cfg.grid_fleet = doc.value("grid_fleet", cfg.fleets.empty() ? cfg.grid_fleet : cfg.fleets.front().id);
    cfg.grid = grid_from_json(doc.value("grid", json::object()), cfg.seed);
    if (doc.contains("search")) cfg.search = search_space_from_json(doc.at("search"));
    if (doc.contains("subsequence_search")) {
      json merged = search_space_to_json(embedded_search_space());
      merged.merge_patch(doc.at("subsequence_search"));
      cfg.subsequence_search = search_space_from_json(merged);
    }
    cfg.run_sequence = doc.value("run_sequence", cfg.run_sequence);
    cfg.run_subsequence = doc.value("run_subsequence", cfg.run_subsequence);
    TransferSpec ts;
    ts.seed = cfg.seed;
    ts.config.kind = ModelKind::Qgru;
    ts.config.seed = cfg.seed;
    if (doc.contains("transfer")) {
      const auto& t = doc.at("transfer");
      cfg.transfer_source = t.value("source", cfg.transfer_source);
      cfg.transfer_target = t.value("target", cfg.transfer_target);
      ts = transfer_spec_from_json(t, ts);
      if (t.contains("strategies"))
        for (const auto& c : t.at("strategies")) cfg.strategies.push_back(cell_from(c.get<std::string>()));
    }
    cfg.transfer = ts;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("run configuration: ") + e.what());
  }
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json fleets = json::array();
  for (const auto& f : cfg.fleets) {
    json e{{"id", f.id}, {"dir", f.dir.generic_string()}};
    if (f.spec) e["spec"] = synthdata::spec_to_json(*f.spec);
    fleets.push_back(e);
  }
  json strategies = json::array();
  for (const auto& [s, c] : cfg.strategies) strategies.push_back(to_string(s) + "/" + to_string(c));
  json transfer = transfer_spec_to_json(cfg.transfer);
  transfer["source"] = cfg.transfer_source;
  transfer["target"] = cfg.transfer_target;
  transfer["strategies"] = strategies;
  return {{"seed", cfg.seed},
          {"output_dir", cfg.output_dir.generic_string()},
          {"quantiles", cfg.quantiles.levels()},
          {"segmentation",
           {{"relax_current_threshold_a", cfg.segmentation.relax_current_threshold_a},
            {"relax_min_duration_s", cfg.segmentation.relax_min_duration_s}}},
          {"fleets", fleets},
          {"grid_fleet", cfg.grid_fleet},
          {"grid", grid_to_json(cfg.grid)},
          {"search", search_space_to_json(cfg.search)},
          {"subsequence_search", search_space_to_json(cfg.subsequence_search)},
          {"run_sequence", cfg.run_sequence},
          {"run_subsequence", cfg.run_subsequence},
          {"transfer", transfer}};
}

RunConfig read_run_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(textio::read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

FleetData prepare_fleet(const RunConfig& cfg, const std::string& id) {
  const auto& src = source(cfg, id);
  const fs::path dir = src.dir.is_relative() ? cfg.output_dir / src.dir : src.dir;
  if (!fs::exists(dir / "manifest.json")) {
    require(src.spec.has_value(), ErrorCode::Io,
            "fleet " + id + ": no manifest in " + dir.string() + " and no spec to generate one");
    std::clog << "generating fleet " << id << " into " << dir.string() << "\n";
    synthdata::generate_fleet(*src.spec, dir, threads_of(cfg));
  }
  std::clog << "harmonizing fleet " << id << "\n";
  auto fleet = harmonize_fleet(dir, cfg.segmentation, threads_of(cfg));
  require(!fleet.segments.empty(), ErrorCode::NoSamples, "fleet " + id + " produced no labelled segments");
  return fleet;
}

void run_grid(const RunConfig& cfg) {
  make_dir(cfg.output_dir);
  const auto fleet = prepare_fleet(cfg, cfg.grid_fleet);
  write_fleet_plot_data(fleet, cfg.output_dir / "plots");

  RowAudit audit;
  std::vector<CellFailure> failures;
  json run = {{"config", run_config_to_json(cfg)}, {"fleet", fleet.fleet_id}, {"segments", fleet.segments.size()}};
  if (cfg.run_sequence) {
    std::clog << "sequence-level grid\n";
    auto rep = run_sequence_level(fleet, cfg.grid, cfg.search, cfg.quantiles, threads_of(cfg));
    textio::write_file(cfg.output_dir / "sequence_level.csv", report_csv(rep.rows));
    textio::write_file(cfg.output_dir / "sequence_best.csv", report_csv(best_rows(rep.rows)));
    run["sequence_level"] = rows_json(rep.rows);
    audit.merge(rep.audit);
    failures.insert(failures.end(), rep.failures.begin(), rep.failures.end());
  }
  if (cfg.run_subsequence) {
    std::clog << "subsequence-level grid\n";
    auto rep = run_subsequence_level(fleet, cfg.grid, cfg.subsequence_search, cfg.quantiles, cfg.grid.autoregressive,
                                     threads_of(cfg));
    textio::write_file(cfg.output_dir / "subsequence_level.csv", report_csv(rep.rows));
    textio::write_file(cfg.output_dir / "subsequence_best.csv", report_csv(best_rows(rep.rows)));
    run["subsequence_level"] = rows_json(rep.rows);
    audit.merge(rep.audit);
    failures.insert(failures.end(), rep.failures.begin(), rep.failures.end());
  }
  textio::write_file(cfg.output_dir / "failures.csv", failures_csv(failures));
  textio::write_file(cfg.output_dir / "audit.json", audit.to_json().dump(2) + "\n");
  textio::write_file(cfg.output_dir / "run.json", run.dump(2) + "\n");
}

std::vector<TransferRow> run_transfer_cmd(const RunConfig& cfg, std::optional<Strategy> strategy,
                                          std::optional<ScalerChoice> scaler) {
  make_dir(cfg.output_dir);
  const auto a = prepare_fleet(cfg, cfg.transfer_source);
  const auto b = prepare_fleet(cfg, cfg.transfer_target);
  TransferStudy study(a, b, cfg.transfer, cfg.quantiles);

  std::vector<std::pair<Strategy, ScalerChoice>> cells;
  if (strategy) {
    if (scaler) cells.emplace_back(*strategy, *scaler);
    else cells = {{*strategy, ScalerChoice::Old}, {*strategy, ScalerChoice::New}};
  } else if (!cfg.strategies.empty()) {
    cells = cfg.strategies;
  } else {
    for (auto s : {Strategy::Retrain, Strategy::ZeroShot, Strategy::FineTune, Strategy::Joint})
      for (auto c : {ScalerChoice::Old, ScalerChoice::New}) cells.emplace_back(s, c);
  }

  std::vector<TransferRow> rows;
  std::optional<double> base;
  for (const auto& [s, c] : cells) {
    std::clog << "transfer " << to_string(s) << "/" << to_string(c) << "\n";
    rows.push_back({s, c, study.run(s, c), 0.0});
    if (s == Strategy::Retrain && c == ScalerChoice::Old) base = rows.back().report.aql;
  }
  if (!base) base = study.run(Strategy::Retrain, ScalerChoice::Old).aql;
  for (auto& r : rows) r.change_pct = *base > 0.0 ? 100.0 * (r.report.aql - *base) / *base : 0.0;

  json out = {{"config", run_config_to_json(cfg)}, {"baseline_aql", *base}, {"audit", study.audit().to_json()}};
  json cells_json = json::array();
  for (const auto& r : rows)
    cells_json.push_back({{"strategy", to_string(r.strategy)},
                          {"scaler", to_string(r.scaler)},
                          {"change_pct", r.change_pct},
                          {"report", metrics::to_json(r.report)}});
  out["cells"] = cells_json;
  textio::write_file(cfg.output_dir / "transfer.csv", transfer_csv(rows));
  textio::write_file(cfg.output_dir / "transfer.json", out.dump(2) + "\n");
  return rows;
}

}  // namespace hystlab::harness

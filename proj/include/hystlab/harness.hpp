#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hystlab/core.hpp"
#include "hystlab/dimred.hpp"
#include "hystlab/harmonize.hpp"
#include "hystlab/metrics.hpp"
#include "hystlab/models.hpp"
#include "hystlab/random.hpp"
#include "hystlab/synthdata.hpp"

namespace hystlab::harness {

using core::QuantileLevels;
using dimred::ReducerKind;
using harmonize::SegmentationPolicy;
using harmonize::Segment;
using harmonize::SeqTensor;
using harmonize::WindowLength;
using models::ModelKind;

// ---- harmonized fleets -----------------------------------------------------------

struct CycleSummary {
  std::string cycle_id;
  double duration_hours = 0.0;
  double min_current_a = 0.0;
  double max_current_a = 0.0;
  // (voltage, temperature) at every SoC correction: the relaxed-voltage view.
  std::vector<std::pair<double, double>> rest_voltage_temperature;
};

struct FleetData {
  std::string fleet_id;
  std::vector<Segment> segments;     // manifest order, then time order
  std::vector<CycleSummary> cycles;  // cycles that survived filtering
  std::vector<core::FileError> errors;
  std::size_t cycles_filtered = 0;   // dropped for a missing channel
};

// Loads, unit-standardizes, filters, resamples and segments a fleet. Labels
// come from labels.csv next to the manifest. Accepts the manifest path or
// its directory.
FleetData harmonize_fleet(const std::filesystem::path& manifest_or_dir, const SegmentationPolicy& policy,
                          unsigned threads = 0);

// ---- experiment samples -----------------------------------------------------------

enum class FeatureKind { Stats, Tensor };

struct SampleSet {
  FeatureKind kind = FeatureKind::Stats;
  std::vector<double> labels;
  std::vector<std::size_t> parent;    // segment index of each sample
  std::vector<std::size_t> position;  // order within the parent (subsequences)
  Matrix stats;                       // N x 57 when kind == Stats
  std::vector<std::string> feature_names;
  SeqTensor tensor;                   // N x T x 3 when kind == Tensor

  std::size_t size() const { return labels.size(); }
};

SampleSet sequence_stats(const FleetData& fleet, WindowLength length);
SampleSet sequence_tensor(const FleetData& fleet, WindowLength length, std::size_t steps);
// Non-overlapping windows of `length` steps, each resampled to `steps`.
// Throws NoSamples when every segment is shorter than `length`.
SampleSet subsequence_tensor(const FleetData& fleet, std::size_t length, std::size_t steps);

SampleSet concat(const SampleSet& a, const SampleSet& b);

// 80/10/10 split at the parent-segment level.
core::DataSplit split_samples(const SampleSet& s, std::uint64_t seed);

// ---- configs and pipelines --------------------------------------------------------

struct TrainConfig {
  ModelKind kind = ModelKind::Lqr;
  models::LqrParams lqr;
  models::QxgbParams qxgb;
  models::QgruParams qgru;
  dimred::ReducerSettings reducer;
  bool autoregressive = false;  // QGRU*: previous subsequence's label as an extra channel
  std::uint64_t seed = 0;
};

nlohmann::json config_to_json(const TrainConfig& c);
// Missing keys keep the defaults.
TrainConfig config_from_json(const nlohmann::json& doc);

// Scaler, reducer and model fitted together on the same rows.
struct Pipeline {
  harmonize::MinMaxScalerParams scaler;
  dimred::Reducer reducer;
  models::QuantileModel model;
  FeatureKind features = FeatureKind::Stats;

  Matrix predict(const SampleSet& s, std::span<const std::size_t> rows) const;
  nlohmann::json state_json() const;  // scaler + reducer, stored in the model file
  metrics::InputShape input_shape(const SampleSet& s) const;
};

// Records every row id consumed by each phase of a run. Phase names may carry
// a scope prefix ("cell:train"); rows are only compared within one scope.
struct RowAudit {
  std::map<std::string, std::set<std::size_t>> phases;

  void log(const std::string& phase, std::span<const std::size_t> rows);
  void merge(const RowAudit& other);
  // True when every "test" phase shares no row with the other phases of its scope.
  bool disjoint() const;
  nlohmann::json to_json() const;  // phase -> row count, plus the disjointness verdict
};

// Fits scaler and reducer on `fit_rows`, then the model. QGRU uses
// `val_rows` for early stopping; statistical models ignore them. Audit
// phases are prefixed with `scope`.
Pipeline fit_pipeline(const SampleSet& s, std::span<const std::size_t> fit_rows,
                      std::span<const std::size_t> val_rows, const TrainConfig& config,
                      const QuantileLevels& quantiles, RowAudit* audit = nullptr, const std::string& scope = {});

// Teacher-forcing feedback for QGRU*: the label of the previous subsequence
// of the same parent, 0 for the first.
std::vector<double> feedback_labels(const SampleSet& s, std::span<const std::size_t> rows);

// ---- random search ------------------------------------------------------------------

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool log = false;

  double draw(Rng& rng) const;
};

struct SearchSpace {
  Range lqr_l1{1e-4, 1.0, true};
  Range qxgb_lr{0.005, 0.1, true};
  Range qxgb_depth{3, 5};
  Range qxgb_subsample{0.6, 1.0};
  Range qxgb_lambda{0.1, 10.0, true};
  Range qxgb_alpha{0.1, 3.0, true};
  Range qxgb_min_child{1, 4};
  Range qxgb_colsample{0.7, 0.9};
  Range qxgb_rounds{50, 1000};
  Range qgru_lr{1e-4, 1e-2, true};
  Range qgru_hidden{4, 64};
  Range qgru_layers{1, 2};
  Range qgru_batch{8, 32};
  std::size_t qgru_max_epochs = 60;
  std::size_t qgru_patience = 8;

  void validate() const;
};

// The search space narrowed to models that fit the embedded budget
// (single layer, hidden <= 16); used for subsequence-level QGRU.
SearchSpace embedded_search_space();

nlohmann::json search_space_to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const nlohmann::json& doc);

TrainConfig sample_config(ModelKind kind, const SearchSpace& space, Rng& rng);

// Seeded k-fold partition of `rows`; fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> rows, std::size_t k, std::uint64_t seed);

using ConfigSampler = std::function<TrainConfig(Rng&)>;
using FoldScorer = std::function<double(const TrainConfig&, std::span<const std::size_t> fit_rows,
                                        std::span<const std::size_t> val_rows)>;

struct SearchResult {
  TrainConfig best;
  std::size_t best_trial = 0;
  std::vector<double> trial_scores;  // mean validation AQL; empty when n_trials == 1
};

// Draws n_trials configs, scores each by mean validation AQL over k folds and
// returns the argmin (earlier trial wins ties). With one trial the config is
// returned unscored.
SearchResult random_search_cv(const ConfigSampler& sampler, const FoldScorer& scorer,
                              std::span<const std::size_t> rows, std::size_t n_trials, std::size_t folds,
                              std::uint64_t seed, unsigned threads = 1);

// ---- experiment grids ------------------------------------------------------------------

struct GridSpec {
  std::vector<WindowLength> sequence_lengths{600, 3000, 6000, harmonize::kAll};
  std::vector<std::size_t> resample_steps{10, 60, 120, 240};
  std::vector<ReducerKind> dimreds{ReducerKind::Pca, ReducerKind::FReg, ReducerKind::None};
  std::vector<ModelKind> models{ModelKind::Lqr, ModelKind::Qxgb, ModelKind::Qgru};
  std::map<ModelKind, std::size_t> n_trials{{ModelKind::Lqr, 50}, {ModelKind::Qxgb, 50}, {ModelKind::Qgru, 50}};
  std::size_t cv_folds = 5;
  double pca_variance = 0.95;
  std::size_t freg_k = 10;
  std::vector<std::size_t> subsequence_lengths{100, 600, 3000, 6000};
  std::vector<std::size_t> subsequence_steps{10, 60, 120, 240};
  bool autoregressive = true;
  std::size_t max_train_samples = 0;  // cap on training rows for subsequence runs; 0 = no cap
  std::uint64_t seed = 0;

  void validate() const;
};

struct ReportRow {
  std::string dimred;
  std::string model;
  std::string size;
  std::string resample;
  double aql = 0.0;
  double rom_mb = 0.0;
  double ram_mb = 0.0;
  nlohmann::json config;  // chosen hyperparameters, for the JSON log only
};

struct CellFailure {
  std::string cell;
  std::string message;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;  // deterministic grid order
  std::vector<CellFailure> failures;
  RowAudit audit;
};

std::string size_label(WindowLength length);

ExperimentReport run_sequence_level(const FleetData& fleet, const GridSpec& grid, const SearchSpace& space,
                                    const QuantileLevels& quantiles, unsigned threads = 0);
ExperimentReport run_subsequence_level(const FleetData& fleet, const GridSpec& grid, const SearchSpace& space,
                                       const QuantileLevels& quantiles, bool autoregressive,
                                       unsigned threads = 0);

// Lowest-AQL row per model, in first-appearance order.
std::vector<ReportRow> best_rows(std::span<const ReportRow> rows);

// ---- transfer ---------------------------------------------------------------------------

enum class Strategy { Retrain, ZeroShot, FineTune, Joint };
enum class ScalerChoice { Old, New };

std::string to_string(Strategy s);
std::string to_string(ScalerChoice s);
Strategy strategy_from_string(const std::string& name);  // bb | ab | ftb | joint
ScalerChoice scaler_from_string(const std::string& name);

struct TransferSpec {
  bool subsequence = true;
  std::size_t length = 6000;  // L (window length, or truncation at sequence level; 0 = All)
  std::size_t steps = 240;    // T
  TrainConfig config;         // tuned QGRU configuration
  double finetune_lr_factor = 0.1;
  std::optional<std::size_t> finetune_epochs;  // unset = the configured max epochs
  std::size_t max_train_samples = 0;  // cap per fleet on training rows; 0 = no cap
  double b_train_fraction = 1.0;      // share of B's train/val rows available for fitting (ablation)
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json transfer_spec_to_json(const TransferSpec& s);
TransferSpec transfer_spec_from_json(const nlohmann::json& doc, const TransferSpec& base = {});

struct TransferRow {
  Strategy strategy = Strategy::Retrain;
  ScalerChoice scaler = ScalerChoice::Old;
  metrics::EvalReport report;
  double change_pct = 0.0;  // vs Retrain/Old
};

// Samples of both fleets prepared once, with the pretrained fleet-A model
// cached across strategies.
class TransferStudy {
 public:
  TransferStudy(const FleetData& a, const FleetData& b, TransferSpec spec, QuantileLevels quantiles = {});

  metrics::EvalReport run(Strategy strategy, ScalerChoice scaler);
  // All eight strategy/scaler cells with percent change vs Retrain/Old.
  std::vector<TransferRow> run_all();
  const RowAudit& audit() const { return audit_; }

  // Exposed for invariant checks.
  std::size_t fleet_b_train_rows() const { return b_split_.train_ids.size(); }
  const models::QgruModel& pretrained(ScalerChoice scaler);

 private:
  SampleSet build(const FleetData& f) const;
  harmonize::MinMaxScalerParams scaler_for(Strategy s, ScalerChoice c) const;
  SeqTensor scaled(const SampleSet& s, const harmonize::MinMaxScalerParams& p) const;
  std::vector<std::size_t> cap(std::vector<std::size_t> rows, std::uint64_t salt) const;
  void log(const std::string& scope, const std::string& phase, std::span<const std::size_t> rows, bool fleet_b);

  TransferSpec spec_;
  QuantileLevels quantiles_;
  SampleSet a_, b_;
  core::DataSplit a_split_, b_split_;
  std::vector<std::size_t> a_train_, a_val_, b_train_, b_val_;  // capped rows used for fitting
  std::array<std::optional<models::QgruModel>, 2> pretrained_;  // by scaler choice
  RowAudit audit_;
};

metrics::EvalReport run_transfer(const FleetData& a, const FleetData& b, Strategy strategy, ScalerChoice scaler,
                                 const TransferSpec& spec, const QuantileLevels& quantiles = {});

// ---- reports -----------------------------------------------------------------------------

inline constexpr const char* kReportHeader = "dimred,model,size,resample,aql,rom_mb,ram_mb";

std::string report_csv(std::span<const ReportRow> rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);
std::string transfer_csv(std::span<const TransferRow> rows);

// Label histogram, per-cycle min/max current, relaxed voltage vs
// temperature and cycle duration histogram, one CSV each.
void write_fleet_plot_data(const FleetData& fleet, const std::filesystem::path& dir);

// ---- run configuration ------------------------------------------------------------------

struct FleetSource {
  std::string id;
  std::filesystem::path dir;                   // existing fleet directory, or where to generate it
  std::optional<synthdata::FleetSpec> spec;    // generate when the directory has no manifest
};

struct RunConfig {
  std::vector<FleetSource> fleets;
  std::filesystem::path output_dir = "hystlab_run";
  std::uint64_t seed = 0;
  QuantileLevels quantiles;
  SegmentationPolicy segmentation;
  std::string grid_fleet = "A";
  GridSpec grid;
  SearchSpace search;
  SearchSpace subsequence_search = embedded_search_space();
  bool run_sequence = true;
  bool run_subsequence = true;
  // transfer
  std::string transfer_source = "A";
  std::string transfer_target = "B";
  TransferSpec transfer;
  std::vector<std::pair<Strategy, ScalerChoice>> strategies;
  unsigned threads = 0;
};

// Relative fleet directories resolve against the output directory, so a run
// never writes outside it.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig read_run_config(const std::filesystem::path& path);

// Generates missing fleets and harmonizes the named one.
FleetData prepare_fleet(const RunConfig& cfg, const std::string& id);

// Runs both grids, writes sequence_level.csv, sequence_best.csv,
// subsequence_level.csv, audit.json, failures.csv, run.json and plot data.
void run_grid(const RunConfig& cfg);

// Runs one strategy/scaler cell (or all when strategy is empty) and writes
// transfer.csv plus transfer.json.
std::vector<TransferRow> run_transfer_cmd(const RunConfig& cfg, std::optional<Strategy> strategy,
                                          std::optional<ScalerChoice> scaler);

// Rebuilds the report directory from a finished run directory.
void emit_report(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

}  // namespace hystlab::harness

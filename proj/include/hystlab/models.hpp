#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hystlab/core.hpp"
#include "hystlab/harmonize.hpp"
#include "hystlab/matrix.hpp"

namespace hystlab::models {

using core::QuantileLevels;
using harmonize::SeqTensor;

enum class ModelKind { Lqr, Qxgb, Qgru };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Lower empirical quantile y_(ceil(tau n)); minimizes the mean pinball loss.
double empirical_quantile(std::span<const double> y, double tau);

// Rounds every value to the nearest float32. Models are stored this way at
// the end of training so a save/load round trip is bit-exact.
void quantize_f32(std::span<double> values);

// ---- LQR ------------------------------------------------------------------------

struct LqrParams {
  double l1 = 0.0;
  double learning_rate = 0.1;
  std::size_t max_epochs = 3000;
  std::size_t patience = 100;
};

struct LqrModel {
  QuantileLevels quantiles;
  std::size_t input_dim = 0;
  std::vector<std::vector<double>> weights;  // per quantile, length input_dim
  std::vector<double> intercepts;            // per quantile
  LqrParams params;
};

LqrModel train_lqr(const Matrix& x, std::span<const double> y, const QuantileLevels& quantiles,
                   const LqrParams& params);
Matrix predict_lqr(const LqrModel& model, const Matrix& x);

// ---- QXGB -------------------------------------------------------------------------

struct QxgbParams {
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  double subsample = 1.0;
  double lambda = 1.0;
  double alpha = 0.0;
  double min_child_weight = 1.0;
  double colsample = 1.0;
  std::size_t rounds = 100;
};

// Preorder node list, root first. A leaf has feature == -1. Rows with
// x[feature] < threshold go left.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  std::size_t depth() const;
};

struct QxgbModel {
  QuantileLevels quantiles;
  std::size_t input_dim = 0;
  std::vector<double> base_scores;       // per quantile
  std::vector<std::vector<Tree>> trees;  // per quantile, in boosting order
  QxgbParams params;
  std::uint64_t seed = 0;
};

QxgbModel train_qxgb(const Matrix& x, std::span<const double> y, const QuantileLevels& quantiles,
                     const QxgbParams& params, std::uint64_t seed);
Matrix predict_qxgb(const QxgbModel& model, const Matrix& x);

// ---- QGRU --------------------------------------------------------------------------

enum class Optimizer { Momentum, Adam };

struct QgruParams {
  std::size_t hidden = 16;
  std::size_t layers = 1;
  double learning_rate = 0.005;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 60;
  std::size_t patience = 8;
  double clip_norm = 1.0;
  Optimizer optimizer = Optimizer::Adam;
};

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& name);

// All parameters live in one flat vector in serialization order:
// per layer W_z, W_r, W_h (in x H), U_z, U_r, U_h (H x H), b_z, b_r, b_h (H),
// then per quantile head weights (H) followed by its bias. Matrices row-major.
struct QgruModel {
  QuantileLevels quantiles;
  std::size_t input_dim = 0;  // includes the feedback channel when autoregressive
  std::size_t hidden = 0;
  std::size_t layers = 1;
  bool autoregressive = false;
  std::vector<double> params;
  QgruParams train_params;
  std::uint64_t seed = 0;

  std::size_t param_count() const { return params.size(); }
};

std::size_t qgru_param_count(std::size_t input_dim, std::size_t hidden, std::size_t layers,
                             std::size_t n_quantiles);

// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization.
QgruModel init_qgru(std::size_t input_dim, std::size_t hidden, std::size_t layers,
                    const QuantileLevels& quantiles, std::uint64_t seed, bool autoregressive = false);

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GruLayerView {
  Eigen::Map<const RowMat> wz, wr, wh, uz, ur, uh;
  Eigen::Map<const Eigen::RowVectorXd> bz, br, bh;
};

GruLayerView layer_view(const QgruModel& m, std::size_t layer);

// Final top-layer hidden state for one sequence (steps x input_dim, row-major).
Eigen::VectorXd gru_forward(const QgruModel& model, std::span<const double> sequence, std::size_t steps);

Matrix predict_qgru(const QgruModel& model, const SeqTensor& x);

// Mean pinball loss over the given rows and all quantiles plus its gradient
// with respect to `params` (same layout), by backpropagation through time.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossGradient qgru_loss_gradient(const QgruModel& model, const SeqTensor& x, std::span<const double> y,
                                std::span<const std::size_t> rows);

struct QgruValidation {
  const SeqTensor* x = nullptr;
  std::span<const double> y;
};

struct QgruTrace {
  std::vector<double> train_loss;  // mean pinball over the training rows, per epoch
  std::vector<double> val_aql;
  std::size_t best_epoch = 0;
};

// Mini-batch training of the shared trunk and all heads on the average
// pinball loss. Starts from `init` when given (fine-tuning); otherwise from a
// fresh initialization with head biases at the empirical label quantiles.
QgruModel train_qgru(const SeqTensor& x, std::span<const double> y, const QuantileLevels& quantiles,
                     const QgruParams& params, std::uint64_t seed, QgruValidation validation = {},
                     const QgruModel* init = nullptr, QgruTrace* trace = nullptr);

// Subsequence k of a parent gets the median prediction of subsequence k-1 as
// a constant extra channel (0 for the first). `parent` and `position` give
// each row's parent segment and its 0-based order within it; positions of a
// parent must appear in increasing order without gaps.
Matrix predict_qgru_autoregressive(const QgruModel& model, const SeqTensor& x,
                                   std::span<const std::size_t> parent,
                                   std::span<const std::size_t> position);

// Appends the feedback channel for teacher-forced training: the true label
// of the previous subsequence of the same parent, 0 for the first.
SeqTensor append_feedback_channel(const SeqTensor& x, std::span<const double> feedback);

// ---- any model ---------------------------------------------------------------------

using QuantileModel = std::variant<LqrModel, QxgbModel, QgruModel>;

ModelKind kind_of(const QuantileModel& m);
const QuantileLevels& quantiles_of(const QuantileModel& m);

// Sorts each row ascending.
Matrix repair_quantile_crossing(const Matrix& predictions);

// ---- serialization -------------------------------------------------------------------

inline constexpr char kModelMagic[5] = {'H', 'Y', 'S', 'T', '1'};
inline constexpr int kModelFormatVersion = 1;

// Flat float32 parameter blob in documented order.
std::vector<float> parameter_blob(const QuantileModel& m);
nlohmann::json model_header(const QuantileModel& m);

// Magic, one JSON header line with `extra` merged under "pipeline", blob.
std::string serialize_model(const QuantileModel& m, const nlohmann::json& extra = {});

struct LoadedModel {
  QuantileModel model;
  nlohmann::json pipeline;
  std::size_t file_bytes = 0;
};

LoadedModel deserialize_model(std::string_view bytes);
void save_model(const QuantileModel& m, const std::filesystem::path& path, const nlohmann::json& extra = {});
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace hystlab::models

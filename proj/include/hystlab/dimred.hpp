#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hystlab/matrix.hpp"

namespace hystlab::dimred {

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are eigenvectors, same order as values
};

// Cyclic Jacobi rotations; stops once the off-diagonal Frobenius norm drops
// below `tolerance`. Eigenvectors are sign-normalised so that the entry with
// the largest magnitude is positive.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-10, int max_sweeps = 100);

struct PcaProjector {
  std::vector<double> mean;                       // length F
  Matrix components;                              // F x K, orthonormal columns
  std::vector<double> explained_variance_ratio;   // length K, non-increasing

  std::size_t input_dim() const { return components.rows(); }
  std::size_t output_dim() const { return components.cols(); }
};

// Exactly one of the two is used: a fixed component count, or the smallest
// prefix reaching the cumulative variance target in (0, 1].
struct PcaTarget {
  std::optional<std::size_t> components;
  double variance = 0.95;
};

PcaProjector fit_pca(const Matrix& x, PcaTarget target);
Matrix apply_pca(const Matrix& x, const PcaProjector& pca);
Matrix inverse_pca(const Matrix& scores, const PcaProjector& pca);

inline constexpr double kFStatCap = 1e15;

struct FRegSelector {
  std::vector<double> f_stats;
  std::vector<double> p_values;
  std::vector<std::size_t> selected_indices;  // ascending p-value, ties by index
  std::vector<std::string> selected_names;
  std::size_t input_dim = 0;
};

// Upper tail P(F > f) of the F(1, dof) distribution.
double f_upper_tail(double f, double dof);

FRegSelector fit_freg(const Matrix& x, std::span<const double> y, std::size_t k,
                      std::span<const std::string> feature_names = {});
Matrix apply_freg(const Matrix& x, const FRegSelector& selector);

enum class ReducerKind { None, Pca, FReg };

std::string to_string(ReducerKind kind);
ReducerKind reducer_kind_from_string(const std::string& name);

// Fitted reduction step applied between scaling and a statistical model.
struct Reducer {
  std::variant<std::monostate, PcaProjector, FRegSelector> fitted;

  ReducerKind kind() const;
  Matrix apply(const Matrix& x) const;
  std::size_t output_dim(std::size_t input_dim) const;
};

struct ReducerSettings {
  ReducerKind kind = ReducerKind::None;
  PcaTarget pca;
  std::size_t freg_k = 10;
};

Reducer fit_reducer(const Matrix& x, std::span<const double> y, const ReducerSettings& settings,
                    std::span<const std::string> feature_names = {});

nlohmann::json reducer_to_json(const Reducer& r);
Reducer reducer_from_json(const nlohmann::json& doc);

}  // namespace hystlab::dimred

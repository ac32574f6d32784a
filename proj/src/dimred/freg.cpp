#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "hystlab/dimred.hpp"

namespace hystlab::dimred {

double f_upper_tail(double f, double dof) {
  require(dof > 0.0, ErrorCode::InvalidArgument, "F distribution needs positive degrees of freedom");
  if (!(f > 0.0)) return 1.0;
  if (f >= kFStatCap) return 0.0;
  // P(F(1, d) > f) = I_{d / (d + f)}(d / 2, 1 / 2)
  return std::clamp(boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + f)), 0.0, 1.0);
}

FRegSelector fit_freg(const Matrix& x, std::span<const double> y, std::size_t k,
                      std::span<const std::string> feature_names) {
  const std::size_t n = x.rows(), f = x.cols();
  require(y.size() == n, ErrorCode::DimensionMismatch, "label count does not match rows");
  require(n >= 3, ErrorCode::InvalidArgument, "F-regression needs at least three samples");
  require(k >= 1 && k <= f, ErrorCode::InvalidArgument, "F-regression K must lie in [1, F]");
  require(feature_names.empty() || feature_names.size() == f, ErrorCode::DimensionMismatch,
          "feature name count mismatch");

  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double syy = 0.0;
  for (double v : y) syy += (v - y_mean) * (v - y_mean);
  require(syy > 0.0, ErrorCode::InvalidArgument, "F-regression target has zero variance");

  const double dof = static_cast<double>(n - 2);
  FRegSelector sel;
  sel.input_dim = f;
  sel.f_stats.assign(f, 0.0);
  sel.p_values.assign(f, 1.0);
  for (std::size_t j = 0; j < f; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, j);
    mean /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dx = x(r, j) - mean;
      sxx += dx * dx;
      sxy += dx * (y[r] - y_mean);
    }
    if (!(sxx > 0.0)) continue;  // constant feature: F = 0, p = 1
    const double r2 = std::min(1.0, sxy * sxy / (sxx * syy));
    const double fstat = r2 >= 1.0 ? kFStatCap : std::min(kFStatCap, r2 / (1.0 - r2) * dof);
    sel.f_stats[j] = fstat;
    sel.p_values[j] = f_upper_tail(fstat, dof);
  }

  std::vector<std::size_t> order(f);
  std::iota(order.begin(), order.end(), 0);
  // p-values of very strong features underflow to 0; F breaks those ties.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sel.p_values[a] != sel.p_values[b]) return sel.p_values[a] < sel.p_values[b];
    if (sel.f_stats[a] != sel.f_stats[b]) return sel.f_stats[a] > sel.f_stats[b];
    return a < b;
  });
  sel.selected_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (auto idx : sel.selected_indices)
    sel.selected_names.push_back(feature_names.empty() ? "feature_" + std::to_string(idx) : feature_names[idx]);
  return sel;
}

Matrix apply_freg(const Matrix& x, const FRegSelector& selector) {
  require(x.cols() == selector.input_dim, ErrorCode::DimensionMismatch,
          "F-regression selector expects " + std::to_string(selector.input_dim) + " columns, got " +
              std::to_string(x.cols()));
  Matrix out(x.rows(), selector.selected_indices.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < selector.selected_indices.size(); ++k)
      out(r, k) = x(r, selector.selected_indices[k]);
  return out;
}

}  // namespace hystlab::dimred

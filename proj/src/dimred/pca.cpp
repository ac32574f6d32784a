#include <algorithm>
#include <cmath>
#include <numeric>

#include "hystlab/dimred.hpp"

namespace hystlab::dimred {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.rows(); ++p)
    for (std::size_t q = 0; q < a.cols(); ++q)
      if (p != q) s += a(p, q) * a(p, q);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance, int max_sweeps) {
  const std::size_t n = symmetric.rows();
  require(n == symmetric.cols(), ErrorCode::DimensionMismatch, "eigensolver needs a square matrix");
  Matrix a = symmetric;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < max_sweeps && off_diagonal_norm(a) >= tolerance; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t big = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, src)) > std::abs(v(big, src))) big = r;
    const double sign = v(big, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

PcaProjector fit_pca(const Matrix& x, PcaTarget target) {
  const std::size_t n = x.rows(), f = x.cols();
  require(n >= 2, ErrorCode::InvalidArgument, "PCA needs at least two samples");
  require(f >= 1, ErrorCode::InvalidArgument, "PCA needs at least one feature");
  if (target.components)
    require(*target.components >= 1 && *target.components <= f, ErrorCode::InvalidArgument,
            "PCA component count must lie in [1, " + std::to_string(f) + "]");
  else
    require(target.variance > 0.0 && target.variance <= 1.0, ErrorCode::InvalidArgument,
            "PCA variance target must lie in (0, 1]");

  PcaProjector pca;
  pca.mean.assign(f, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) pca.mean[c] += x(r, c);
  for (auto& m : pca.mean) m /= static_cast<double>(n);

  Matrix cov(f, f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < f; ++i) {
      const double di = x(r, i) - pca.mean[i];
      for (std::size_t j = i; j < f; ++j) cov(i, j) += di * (x(r, j) - pca.mean[j]);
    }
  }
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i; j < f; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }

  const auto eig = jacobi_eigen(cov);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  std::vector<double> ratio(f, 0.0);
  if (total > 0.0)
    for (std::size_t k = 0; k < f; ++k) ratio[k] = std::max(eig.values[k], 0.0) / total;

  std::size_t k = f;
  if (target.components) {
    k = *target.components;
  } else {
    double cum = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
      cum += ratio[i];
      if (cum >= target.variance - 1e-12) {
        k = i + 1;
        break;
      }
    }
  }

  pca.components = Matrix(f, k);
  for (std::size_t r = 0; r < f; ++r)
    for (std::size_t c = 0; c < k; ++c) pca.components(r, c) = eig.vectors(r, c);
  pca.explained_variance_ratio.assign(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(k));
  return pca;
}

Matrix apply_pca(const Matrix& x, const PcaProjector& pca) {
  require(x.cols() == pca.input_dim(), ErrorCode::DimensionMismatch,
          "PCA expects " + std::to_string(pca.input_dim()) + " columns, got " + std::to_string(x.cols()));
  Matrix out(x.rows(), pca.output_dim());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < pca.input_dim(); ++i) {
      const double d = x(r, i) - pca.mean[i];
      for (std::size_t k = 0; k < pca.output_dim(); ++k) out(r, k) += d * pca.components(i, k);
    }
  return out;
}

Matrix inverse_pca(const Matrix& scores, const PcaProjector& pca) {
  require(scores.cols() == pca.output_dim(), ErrorCode::DimensionMismatch, "score width mismatch");
  Matrix out(scores.rows(), pca.input_dim());
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t i = 0; i < pca.input_dim(); ++i) {
      double v = pca.mean[i];
      for (std::size_t k = 0; k < pca.output_dim(); ++k) v += scores(r, k) * pca.components(i, k);
      out(r, i) = v;
    }
  return out;
}

}  // namespace hystlab::dimred

#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "hystlab/dimred.hpp"
#include "hystlab/error.hpp"
#include "hystlab/random.hpp"

using namespace hystlab;
using namespace hystlab::dimred;

namespace {

Matrix random_matrix(std::size_t n, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) m(i, j) = rng.normal() * (1.0 + double(j % 5));
  return m;
}

PcaProjector full_pca(const Matrix& x) {
  PcaTarget t;
  t.components = x.cols();
  return fit_pca(x, t);
}

}  // namespace

TEST_CASE("jacobi on a known 2x2") {
  Matrix a(2, 2, std::vector<double>{2, 1, 1, 2});
  const auto e = jacobi_eigen(a);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(e.vectors(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(e.vectors(1, 0) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("pca on the diagonal line") {
  Matrix x(3, 2, std::vector<double>{0, 0, 1, 1, 2, 2});
  PcaTarget t;
  t.components = 1;
  const auto p = fit_pca(x, t);
  CHECK(p.components(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(p.components(1, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  REQUIRE(p.explained_variance_ratio.size() == 1);
  CHECK(p.explained_variance_ratio[0] == doctest::Approx(1.0));
  const auto s = apply_pca(x, p);
  CHECK(s(0, 0) == doctest::Approx(-std::sqrt(2.0)));
  CHECK(s(1, 0) == doctest::Approx(0.0));
  CHECK(s(2, 0) == doctest::Approx(std::sqrt(2.0)));

  const auto by_var = fit_pca(x, PcaTarget{std::nullopt, 0.95});
  CHECK(by_var.output_dim() == 1);
}

TEST_CASE("pca on uncorrelated axes with variances 4 and 1") {
  Matrix x(4, 2, std::vector<double>{2, 1, -2, 1, 2, -1, -2, -1});
  const auto p = full_pca(x);
  CHECK(p.explained_variance_ratio[0] == doctest::Approx(0.8));
  CHECK(p.explained_variance_ratio[1] == doctest::Approx(0.2));
  CHECK(p.components(0, 0) == doctest::Approx(1.0));
  CHECK(p.components(1, 0) == doctest::Approx(0.0));
  CHECK(p.components(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("pca properties on random data") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = random_matrix(60, 12, seed);
    const auto p = full_pca(x);
    for (std::size_t a = 0; a < 12; ++a)
      for (std::size_t b = 0; b < 12; ++b) {
        double dot = 0;
        for (std::size_t r = 0; r < 12; ++r) dot += p.components(r, a) * p.components(r, b);
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
      }
    const auto& ev = p.explained_variance_ratio;
    CHECK(std::is_sorted(ev.rbegin(), ev.rend()));
    CHECK(std::accumulate(ev.begin(), ev.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-8));
    const auto back = inverse_pca(apply_pca(x, p), p);
    double err = 0;
    for (std::size_t i = 0; i < x.data().size(); ++i) err = std::max(err, std::abs(back.data()[i] - x.data()[i]));
    CHECK(err < 1e-6);

    Matrix mean_row(1, 12, p.mean);
    const auto centre = apply_pca(mean_row, p);
    for (double v : centre.data()) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("pca argument errors") {
  const auto x = random_matrix(5, 3, 1);
  PcaTarget t;
  t.components = 4;
  CHECK_THROWS_AS(fit_pca(x, t), Error);
  CHECK_THROWS_AS(fit_pca(random_matrix(1, 3, 1), PcaTarget{}), Error);
  CHECK_THROWS_AS(apply_pca(random_matrix(2, 4, 1), full_pca(x)), Error);
}

TEST_CASE("f statistic for N=12 and r^2=0.5") {
  Matrix x(12, 1);
  std::vector<double> y(12);
  for (std::size_t i = 0; i < 12; ++i) {
    const double xi = (i % 2 == 0) ? 1.0 : -1.0;
    const double ei = (i % 4 < 2) ? 1.0 : -1.0;
    x(i, 0) = xi;
    y[i] = xi + ei;
  }
  const auto s = fit_freg(x, y, 1);
  CHECK(s.f_stats[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(s.p_values[0] == doctest::Approx(dimred::f_upper_tail(10.0, 10.0)));
  // P(F(1,10) > 10) = 0.0101196, from a reference table
  CHECK(s.p_values[0] == doctest::Approx(0.0101196).epsilon(1e-4));
}

TEST_CASE("f-regression edge cases") {
  Matrix x(6, 3);
  std::vector<double> y{1, 2, 3, 4, 5, 6};
  const std::vector<double> orth{1, -1, -1, -1, -1, 1};
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = 2 * y[i];
    x(i, 1) = 7.0;
    x(i, 2) = orth[i];
  }
  double dot = 0;
  for (std::size_t i = 0; i < 6; ++i) dot += (y[i] - 3.5) * orth[i];
  REQUIRE(dot == 0.0);
  const auto s = fit_freg(x, y, 3);
  CHECK(s.f_stats[0] == kFStatCap);
  CHECK(s.p_values[0] == 0.0);
  CHECK(s.f_stats[1] == 0.0);
  CHECK(s.p_values[1] == 1.0);
  CHECK(s.f_stats[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.p_values[2] == doctest::Approx(1.0));
  CHECK(s.selected_indices.front() == 0);

  const std::vector<double> flat(6, 1.0);
  CHECK_THROWS_AS(fit_freg(x, flat, 1), Error);
  CHECK_THROWS_AS(fit_freg(random_matrix(2, 3, 1), std::vector<double>{1, 2}, 1), Error);
}

TEST_CASE("f-regression ties go to the lower index") {
  Matrix x(40, 8);
  std::vector<double> y(40);
  Rng rng(4);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = rng.normal();
    for (std::size_t j = 0; j < 8; ++j) x(i, j) = rng.normal();
  }
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 4) = y[i] + 0.3 * double(i % 2);
    x(i, 7) = x(i, 4);
  }
  const auto s = fit_freg(x, y, 1);
  CHECK(s.selected_indices == std::vector<std::size_t>{4});
}

TEST_CASE("f-regression p-values decrease as F grows") {
  const auto x = random_matrix(40, 20, 77);
  Rng rng(78);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 0.4 * x(i, 2) + 0.1 * x(i, 5) + rng.normal();
  const auto s = fit_freg(x, y, 5);
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.f_stats[a] < s.f_stats[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) CHECK(s.p_values[order[k]] <= s.p_values[order[k - 1]]);
  for (double p : s.p_values) CHECK((p >= 0.0 && p <= 1.0));
}

TEST_CASE("f-regression selection is invariant to positive affine rescaling") {
  auto x = random_matrix(50, 10, 5);
  Rng rng(6);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 1) - 0.5 * x(i, 8) + 0.3 * rng.normal();
  const auto a = fit_freg(x, y, 3);
  for (std::size_t i = 0; i < 50; ++i) x(i, 8) = 12.5 * x(i, 8) + 3.0;
  const auto b = fit_freg(x, y, 3);
  CHECK(a.selected_indices == b.selected_indices);
}

TEST_CASE("f-regression keeps names and column order") {
  const auto x = random_matrix(30, 4, 8);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 3) + 0.01 * x(i, 0);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto s = fit_freg(x, y, 4, names);
  CHECK(s.selected_names.front() == "d");
  const auto r = apply_freg(x, s);
  for (std::size_t k = 0; k < 4; ++k) CHECK(r.column(k) == x.column(s.selected_indices[k]));
}

TEST_CASE("reducers round trip through json") {
  const auto x = random_matrix(30, 6, 3);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 2);
  for (auto kind : {ReducerKind::None, ReducerKind::Pca, ReducerKind::FReg}) {
    ReducerSettings st;
    st.kind = kind;
    st.freg_k = 3;
    const auto r = fit_reducer(x, y, st);
    const auto back = reducer_from_json(reducer_to_json(r));
    CHECK(back.kind() == kind);
    CHECK(back.apply(x) == r.apply(x));
  }
}

TEST_CASE("f-regression finds a planted pair") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(31, seed));
    Matrix x(500, 57);
    for (auto& v : x.data()) v = rng.uniform();
    std::vector<double> y(500);
    for (std::size_t i = 0; i < 500; ++i) y[i] = 1.5 * x(i, 3) - x(i, 9) + 0.2 * rng.normal();
    auto sel = fit_freg(x, y, 2).selected_indices;
    std::sort(sel.begin(), sel.end());
    hits += sel == std::vector<std::size_t>{3, 9};
  }
  CHECK(hits >= 19);
}

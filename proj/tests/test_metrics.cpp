#include <cmath>

#include <doctest.h>

#include "hystlab/error.hpp"
#include "hystlab/metrics.hpp"
#include "hystlab/models.hpp"
#include "hystlab/random.hpp"

using namespace hystlab;
using namespace hystlab::metrics;

TEST_CASE("pinball branches") {
  CHECK(pinball(0.3, 0.3, 0.7) == 0.0);
  CHECK(pinball(1, 0, 0.95) == 0.95);
  CHECK(pinball(0, 1, 0.95) == doctest::Approx(0.05).epsilon(1e-15));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double y = rng.normal(), yh = rng.normal(), tau = rng.uniform(0.01, 0.99);
    CHECK(pinball(y, yh, tau) >= 0.0);
    CHECK(pinball(y, yh, 0.5) == 0.5 * std::abs(y - yh));
  }
}

TEST_CASE("aql on hand grids") {
  const QuantileLevels q1({0.5});
  Matrix one(1, 1, std::vector<double>{0.0});
  CHECK(aql(std::vector<double>{2.0}, one, q1) == 1.0);

  // losses per (i, tau) = {0.1, 0.3, 0.2 ; 0.0, 0.4, 0.2} built from y = 0 and over-predictions
  const QuantileLevels q({0.25, 0.5, 0.75});
  Matrix p(2, 3, std::vector<double>{0.1 / 0.75, 0.3 / 0.5, 0.2 / 0.25, 0.0, 0.4 / 0.5, 0.2 / 0.25});
  const std::vector<double> y{0.0, 0.0};
  CHECK(aql(y, p, q) == doctest::Approx(0.2).epsilon(1e-15));
  const auto per = per_quantile_loss(y, p, q);
  CHECK(per[0] == doctest::Approx(0.05));
  CHECK(per[1] == doctest::Approx(0.35));
  CHECK(per[2] == doctest::Approx(0.2));

  Matrix perfect(2, 3, 0.0);
  CHECK(aql(y, perfect, q) == 0.0);
  Matrix bad(3, 3);
  CHECK_THROWS_AS(aql(y, bad, q), Error);
}

TEST_CASE("aql is invariant to sample order") {
  Rng rng(2);
  const QuantileLevels q;
  Matrix p(50, 3);
  std::vector<double> y(50);
  for (auto& v : p.data()) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  std::vector<std::size_t> perm(50);
  for (std::size_t i = 0; i < 50; ++i) perm[i] = (i * 7) % 50;
  std::vector<double> y2(50);
  for (std::size_t i = 0; i < 50; ++i) y2[i] = y[perm[i]];
  CHECK(aql(y2, p.select_rows(perm), q) == doctest::Approx(aql(y, p, q)).epsilon(1e-14));
}

TEST_CASE("coverage") {
  const std::vector<double> y{0.1, 0.5, 0.9};
  CHECK(coverage(y, std::vector<double>(3, -1e9), std::vector<double>(3, 1e9)) == 1.0);
  CHECK(coverage(y, std::vector<double>(3, 0.2), std::vector<double>(3, 0.2)) == 0.0);
  CHECK(coverage(y, std::vector<double>{0, 0, 0}, std::vector<double>{0.5, 0.5, 0.5}) == doctest::Approx(2.0 / 3));
}

TEST_CASE("rom counts four bytes per parameter plus the header") {
  models::QgruModel m = models::init_qgru(3, 16, 1, QuantileLevels{}, 1);
  const auto blob = blob_bytes(m);
  CHECK(blob == 4 * m.param_count());
  CHECK(rom_bytes(m) == models::serialize_model(m).size());
  CHECK(rom_bytes(m) > blob);
  auto bigger = models::init_qgru(3, 16, 2, QuantileLevels{}, 1);
  CHECK(blob_bytes(bigger) == 4 * bigger.param_count());

  models::LqrModel l;
  l.quantiles = QuantileLevels({0.5});
  l.input_dim = 1011 - 1;
  l.weights = {std::vector<double>(1010, 0.0)};
  l.intercepts = {0.0};
  CHECK(double(blob_bytes(l)) / kBytesPerMb == doctest::Approx(1011.0 * 4 / 1048576));
  auto l2 = l;
  l2.quantiles = QuantileLevels({0.25, 0.75});
  l2.weights = {l.weights[0], l.weights[0]};
  l2.intercepts = {0.0, 0.0};
  CHECK(blob_bytes(l2) == 2 * blob_bytes(l));

  models::LqrModel empty;
  empty.quantiles = QuantileLevels({0.5});
  empty.weights = {{}};
  empty.intercepts = {0.0};
  CHECK(blob_bytes(empty) == 4);
  CHECK(rom_bytes(empty) == models::serialize_model(empty).size());
}

TEST_CASE("ram formulas") {
  const auto g = models::init_qgru(3, 16, 1, QuantileLevels{}, 1);
  CHECK(ram_bytes(g, {240, 3}) == (240 * 3 + 4 * 16 + 3) * 4);
  CHECK(ram_mb(g, {240, 3}) == doctest::Approx(3.0e-3).epsilon(0.01));
  CHECK(ram_bytes(g, {480, 3}) - ram_bytes(g, {240, 3}) == 240 * 3 * 4);

  models::LqrModel l;
  l.input_dim = 57;
  CHECK(ram_bytes(l, {1, 57}) == 57 * 4);
  models::QxgbModel x;
  x.input_dim = 10;
  x.params.max_depth = 4;
  CHECK(ram_bytes(x, {1, 10}) == 14 * 4);
}

TEST_CASE("eval report json and csv") {
  const QuantileLevels q;
  Matrix p(2, 3, std::vector<double>{-1, 0, 1, 0.1, 0.2, 0.3});
  const std::vector<double> y{0.5, 0.0};
  const auto r = evaluate(y, p, q, 0.25, 0.5);
  CHECK(r.n_samples == 2);
  CHECK(r.coverage_90 == 0.5);
  double mean = 0;
  for (auto& [tau, l] : r.per_quantile_loss) mean += l / 3;
  CHECK(r.aql == doctest::Approx(mean).epsilon(1e-15));
  const auto back = report_from_json(to_json(r));
  CHECK(back.aql == r.aql);
  CHECK(back.per_quantile_loss == r.per_quantile_loss);
  CHECK(back.rom_mb == 0.25);
  CHECK(csv_row(r).find(',') != std::string::npos);
  CHECK(csv_header(r).rfind("n_samples,aql,", 0) == 0);
}

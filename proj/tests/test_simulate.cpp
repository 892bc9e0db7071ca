#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "gmcborrow/errors.hpp"
#include "gmcborrow/simulate.hpp"

using namespace gmc;

TEST_CASE("drift family hand values") {
  CHECK(true_mean(1.0, 0.0) == doctest::Approx(-4.794621373315692).epsilon(1e-14));
  CHECK(true_mean(0.0, 3.7) == 0.0);
  CHECK(true_mean(0.5, 2.0) == doctest::Approx(3.5 * std::sin(3.5)).epsilon(1e-15));
  CHECK(true_mean(0.3, 0.0) == doctest::Approx(1.5 * std::sin(1.5)).epsilon(1e-15));
}

TEST_CASE("noise-free pairs lie exactly on the drift means") {
  SimConfig cfg;
  cfg.N = 21;
  cfg.N0 = 13;
  cfg.sigma = 0.0;  // generation only; run_study would reject this
  cfg.sigma0 = 0.0;
  auto [primary, suppl] = generate_pair(1.5, cfg, 42);

  REQUIRE(primary.n() == 21);
  REQUIRE(suppl.n() == 13);
  CHECK(primary.source == Source::primary);
  CHECK(suppl.source == Source::supplemental);
  CHECK(primary.t(0) == 0.0);
  CHECK(primary.t(20) == 1.0);
  for (int i = 1; i < 21; ++i)
    CHECK(primary.t(i) - primary.t(i - 1) == doctest::Approx(1.0 / 20.0).epsilon(1e-14));
  for (int i = 0; i < 21; ++i) CHECK(primary.y(i) == true_mean(primary.t(i), 0.0));
  for (int i = 0; i < 13; ++i) CHECK(suppl.y(i) == true_mean(suppl.t(i), 1.5));
}

TEST_CASE("zero drift and zero noise make the two sources coincide") {
  SimConfig cfg;
  cfg.N = 11;
  cfg.N0 = 11;
  cfg.sigma = 0.0;
  cfg.sigma0 = 0.0;
  auto [primary, suppl] = generate_pair(0.0, cfg, 7);
  for (int i = 0; i < 11; ++i) {
    CHECK(suppl.t(i) == primary.t(i));
    CHECK(suppl.y(i) == primary.y(i));
  }
}

TEST_CASE("the replicate seed pins the generated data") {
  SimConfig cfg;
  auto [p1, s1] = generate_pair(2.0, cfg, 99);
  auto [p2, s2] = generate_pair(2.0, cfg, 99);
  CHECK((p1.y - p2.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.y - s2.y).cwiseAbs().maxCoeff() == 0.0);

  auto [p3, s3] = generate_pair(2.0, cfg, 100);
  CHECK((p1.y - p3.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generated noise has the requested scale") {
  SimConfig cfg;
  cfg.N = 20000;
  cfg.N0 = 2;
  cfg.sigma = 0.7;
  auto [primary, suppl] = generate_pair(0.0, cfg, 5);
  Eigen::VectorXd resid(primary.n());
  for (int i = 0; i < primary.n(); ++i) resid(i) = primary.y(i) - true_mean(primary.t(i), 0.0);
  const double mean = resid.mean();
  const double sd = std::sqrt((resid.array() - mean).square().sum() / (primary.n() - 1));
  CHECK(std::abs(mean) < 3.0 * 0.7 / std::sqrt(20000.0));
  CHECK(sd == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("criteria identities on fabricated curve summaries") {
  Eigen::VectorXd truth(4);
  truth << -1.0, 0.5, 2.0, 3.0;
  CurveSummary fit;
  fit.grid = truth;
  fit.mean = truth;
  fit.lower = truth.array() - 1.0;
  fit.upper = truth.array() + 1.0;

  Criteria c = compute_criteria(fit, truth);
  CHECK(c.me == 0.0);
  CHECK(c.rmse == 0.0);
  CHECK(c.criw == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c.cp == 1.0);

  fit.mean = truth.array() + 0.5;
  c = compute_criteria(fit, truth);
  CHECK(c.me == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.rmse == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.cp == 1.0);
}

TEST_CASE("criteria with mixed errors and partial coverage") {
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(2);
  CurveSummary fit;
  fit.grid = truth;
  fit.mean.resize(2);
  fit.mean << 0.3, -0.4;
  fit.lower = fit.mean.array() - 0.05;
  fit.upper = fit.mean.array() + 0.05;

  Criteria c = compute_criteria(fit, truth);
  CHECK(c.me == doctest::Approx(-0.05).epsilon(1e-13));
  CHECK(c.rmse == doctest::Approx(std::sqrt(0.125)).epsilon(1e-14));
  CHECK(c.criw == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.cp == 0.0);

  fit.lower(0) = -1.0;
  fit.upper(0) = 1.0;
  c = compute_criteria(fit, truth);
  CHECK(c.cp == 0.5);

  Eigen::VectorXd wrong(3);
  CHECK_THROWS_AS(compute_criteria(fit, wrong), DimensionMismatch);
  CurveSummary empty;
  CHECK_THROWS_AS(compute_criteria(empty, truth), DimensionMismatch);
}

TEST_CASE("simulation config validation") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  cfg.d_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = SimConfig{};
  cfg.d_grid = {-0.5};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = SimConfig{};
  cfg.N = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = SimConfig{};
  cfg.sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), NonpositiveSigma);

  cfg = SimConfig{};
  cfg.M = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = SimConfig{};
  cfg.K = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  cfg = SimConfig{};
  cfg.sampler.chains = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

SimConfig small_cfg() {
  SimConfig cfg;
  cfg.d_grid = {0.0, 5.0};
  cfg.N = 30;
  cfg.N0 = 30;
  cfg.M = 4;
  cfg.mode = SimConfig::Mode::stratified;
  cfg.K = 6;
  cfg.sampler.chains = 2;
  cfg.sampler.burn_in = 300;
  cfg.sampler.iterations = 1200;
  cfg.seed = 303;
  return cfg;
}

}  // namespace

TEST_CASE("study records are replicate-major with exact per-cell averages") {
  SimConfig cfg = small_cfg();
  StudyResult res = run_study(cfg);
  CHECK(res.failures.empty());
  REQUIRE(res.records.size() == 12);

  for (int r = 0; r < 4; ++r) {
    for (int e = 0; e < 3; ++e) {
      const auto& rec = res.records[static_cast<std::size_t>(3 * r + e)];
      CHECK(rec.replicate == r);
      CHECK(static_cast<int>(rec.estimator) == e);
      CHECK(rec.d == cfg.d_grid[static_cast<std::size_t>(r % 2)]);  // stratified round robin
    }
  }

  REQUIRE(res.table.size() == 6);
  for (const auto& row : res.table) {
    CHECK(row.count == 2);
    double me = 0.0, rmse = 0.0, cp = 0.0;
    int cnt = 0;
    for (const auto& rec : res.records) {
      if (rec.d == row.d && rec.estimator == row.estimator) {
        me += rec.criteria.me;
        rmse += rec.criteria.rmse;
        cp += rec.criteria.cp;
        ++cnt;
      }
    }
    REQUIRE(cnt == row.count);
    CHECK(row.me_mean == doctest::Approx(me / cnt).epsilon(1e-15));
    CHECK(row.rmse_mean == doctest::Approx(rmse / cnt).epsilon(1e-15));
    CHECK(row.cp_mean == doctest::Approx(cp / cnt).epsilon(1e-15));
    CHECK(row.rmse_mean > 0.0);
    CHECK(row.criw_mean > 0.0);
    CHECK(row.rmse_se >= 0.0);
    CHECK(row.cp_mean >= 0.0);
    CHECK(row.cp_mean <= 1.0);
  }
}

TEST_CASE("a single replicate fills its table rows verbatim") {
  SimConfig cfg = small_cfg();
  cfg.M = 1;
  cfg.d_grid = {0.5};
  StudyResult res = run_study(cfg);
  REQUIRE(res.records.size() == 3);
  REQUIRE(res.table.size() == 3);
  for (int e = 0; e < 3; ++e) {
    const auto& row = res.table[static_cast<std::size_t>(e)];
    const auto& rec = res.records[static_cast<std::size_t>(e)];
    CHECK(static_cast<int>(row.estimator) == e);
    CHECK(row.count == 1);
    CHECK(row.me_mean == rec.criteria.me);
    CHECK(row.me_se == 0.0);
    CHECK(row.rmse_mean == rec.criteria.rmse);
    CHECK(row.criw_mean == rec.criteria.criw);
    CHECK(row.cp_mean == rec.criteria.cp);
  }
}

TEST_CASE("uniform mode draws drifts from the provided grid") {
  SimConfig cfg;
  cfg.d_grid = {0.0, 5.0};
  cfg.N = 12;
  cfg.N0 = 12;
  cfg.M = 3;
  cfg.K = 4;
  cfg.mode = SimConfig::Mode::uniform;
  cfg.sampler.chains = 1;
  cfg.sampler.burn_in = 150;
  cfg.sampler.iterations = 600;
  cfg.seed = 42;
  StudyResult res = run_study(cfg);
  CHECK(res.failures.empty());
  REQUIRE(res.records.size() == 9);
  for (const auto& rec : res.records) CHECK((rec.d == 0.0 || rec.d == 5.0));
}

TEST_CASE("study results are identical for any worker count") {
  SimConfig cfg = small_cfg();
  cfg.M = 2;
  setenv("GMC_THREADS", "1", 1);
  StudyResult a = run_study(cfg);
  setenv("GMC_THREADS", "4", 1);
  StudyResult b = run_study(cfg);
  unsetenv("GMC_THREADS");

  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].seed == b.records[i].seed);
    CHECK(a.records[i].d == b.records[i].d);
    CHECK(a.records[i].criteria.me == b.records[i].criteria.me);
    CHECK(a.records[i].criteria.rmse == b.records[i].criteria.rmse);
    CHECK(a.records[i].criteria.criw == b.records[i].criteria.criw);
    CHECK(a.records[i].criteria.cp == b.records[i].criteria.cp);
  }
}

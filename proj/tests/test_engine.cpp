#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmcborrow/engine.hpp"
#include "gmcborrow/priors.hpp"
#include "gmcborrow/rng.hpp"

using namespace gmc;

namespace {

double normal_density(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

// Normal mean with known unit variance: theta ~ N(0, 1e4), y_i ~ N(theta, 1).
class ConjugateToy : public PosteriorModel {
 public:
  explicit ConjugateToy(Eigen::VectorXd y) : y_(std::move(y)), names_{"theta"} {}

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int chain, Rng&) const override {
    Eigen::VectorXd s(1);
    s(0) = chain == 0 ? -10.0 : 10.0;  // deliberately overdispersed starts
    return s;
  }

  std::vector<Block> blocks() const override {
    GaussianBlock g;
    g.indices = {0};
    g.terms = [this](const Eigen::VectorXd&) {
      GaussianTerms t;
      t.prior_mean = Eigen::VectorXd::Zero(1);
      t.prior_precision = Eigen::MatrixXd::Constant(1, 1, 1e-4);
      t.obs_precision = Eigen::MatrixXd::Constant(1, 1, static_cast<double>(y_.size()));
      t.obs_weighted = Eigen::VectorXd::Constant(1, y_.sum());
      return t;
    };
    return {g};
  }

  double deviance(const Eigen::VectorXd& s) const override {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) ll += gaussian_logdensity(y_(i), s(0), 1.0);
    return -2.0 * ll;
  }

 private:
  Eigen::VectorXd y_;
  std::vector<std::string> names_;
};

// Standard normal explored by a random-walk Metropolis scalar.
class MetropolisToy : public PosteriorModel {
 public:
  MetropolisToy() : names_{"x"} {}
  const std::vector<std::string>& parameter_names() const override { return names_; }
  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    return Eigen::VectorXd::Constant(1, rng.normal(0.0, 5.0));
  }
  std::vector<Block> blocks() const override {
    MetropolisBlock m;
    m.index = 0;
    m.label = "x";
    m.make_logpost = [](const Eigen::VectorXd&) {
      return [](double v) { return -0.5 * v * v; };
    };
    return {m};
  }
  double deviance(const Eigen::VectorXd& s) const override { return s(0) * s(0); }

 private:
  std::vector<std::string> names_;
};

// Two independent coefficients, each with a one-observation Gaussian likelihood
// and an independent spike/slab prior so the indicator posterior has a closed form.
class SpikeSlabToy : public PosteriorModel {
 public:
  SpikeSlabToy(double y1, double y2, double spike_prec, double slab_prec, double p0)
      : y1_(y1), y2_(y2), spike_(spike_prec), slab_(slab_prec), p0_(p0),
        names_{"theta1", "theta2", "iota1", "iota2"} {}

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s(4);
    s << rng.normal(), rng.normal(), 1.0, 0.0;
    return s;
  }

  std::vector<Block> blocks() const override {
    std::vector<Block> bs;
    for (int j = 0; j < 2; ++j) {
      GaussianBlock g;
      g.indices = {j};
      g.terms = [this, j](const Eigen::VectorXd& s) {
        GaussianTerms t;
        t.prior_mean = Eigen::VectorXd::Zero(1);
        t.prior_precision = Eigen::MatrixXd::Constant(1, 1, s(2 + j) == 1.0 ? spike_ : slab_);
        t.obs_precision = Eigen::MatrixXd::Constant(1, 1, 1.0);
        t.obs_weighted = Eigen::VectorXd::Constant(1, j == 0 ? y1_ : y2_);
        return t;
      };
      bs.push_back(g);

      IndicatorBlock ind;
      ind.index = 2 + j;
      ind.odds = [this, j](const Eigen::VectorXd& s) {
        IndicatorOdds o;
        o.log_spike = gaussian_logdensity(s(j), 0.0, spike_);
        o.log_slab = gaussian_logdensity(s(j), 0.0, slab_);
        o.prior_spike = p0_;
        return o;
      };
      bs.push_back(ind);
    }
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    return -2.0 * (gaussian_logdensity(y1_, s(0), 1.0) + gaussian_logdensity(y2_, s(1), 1.0));
  }

 private:
  double y1_, y2_, spike_, slab_, p0_;
  std::vector<std::string> names_;
};

class NanDevianceToy : public PosteriorModel {
 public:
  NanDevianceToy() : names_{"x"} {}
  const std::vector<std::string>& parameter_names() const override { return names_; }
  Eigen::VectorXd initial_state(int, Rng&) const override { return Eigen::VectorXd::Zero(1); }
  std::vector<Block> blocks() const override {
    MetropolisBlock m;
    m.index = 0;
    m.label = "x";
    m.make_logpost = [](const Eigen::VectorXd&) {
      return [](double v) { return -0.5 * v * v; };
    };
    return {m};
  }
  double deviance(const Eigen::VectorXd&) const override { return std::nan(""); }

 private:
  std::vector<std::string> names_;
};

}  // namespace

TEST_CASE("identical seeds give bit-identical chains") {
  Eigen::VectorXd y(4);
  y << 1.5, 2.5, 2.0, 2.0;
  ConjugateToy model(y);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.burn_in = 50;
  cfg.iterations = 200;
  cfg.seed = 321;

  ChainSet a = run_chains(model, cfg);
  ChainSet b = run_chains(model, cfg);
  REQUIRE(a.n_chains() == b.n_chains());
  for (int c = 0; c < a.n_chains(); ++c) {
    CHECK(a.draws[c] == b.draws[c]);
    CHECK(a.deviance[c] == b.deviance[c]);
  }

  cfg.seed = 322;
  ChainSet d = run_chains(model, cfg);
  CHECK(a.draws[0] != d.draws[0]);
}

TEST_CASE("thinning and shapes follow the config") {
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  ConjugateToy model(y);
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.burn_in = 10;
  cfg.iterations = 100;
  cfg.thin = 5;
  ChainSet cs = run_chains(model, cfg);
  CHECK(cs.n_chains() == 3);
  CHECK(cs.n_stored() == 20);
  CHECK(cs.n_params() == 1);
  CHECK(cs.index_of("theta") == 0);
  CHECK(cs.index_of("missing") == -1);
  CHECK(cs.pooled(0).size() == 60);
  CHECK(cs.pooled_deviance().size() == 60);

  SamplerConfig bad;
  bad.chains = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("conjugate posterior mean is recovered within Monte Carlo error") {
  Eigen::VectorXd y(4);
  y << 2.0, 2.0, 2.0, 2.0;
  ConjugateToy model(y);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.burn_in = 200;
  cfg.iterations = 4000;
  cfg.seed = 7;

  ChainSet cs = run_chains(model, cfg);
  const double post_prec = 4.0 + 1e-4;
  const double post_mean = 8.0 / post_prec;
  Eigen::VectorXd pooled = cs.pooled(0);
  const double mean = pooled.mean();
  const double se = std::sqrt(1.0 / post_prec / pooled.size());
  CHECK(std::abs(mean - post_mean) < 3.0 * se);  // draws are exact iid here

  Diagnostics d = diagnostics(cs);
  CHECK(d.rhat[0] < 1.05);
  CHECK(d.ess[0] > 0.0);
  CHECK(d.ess[0] <= pooled.size() * 1.05);
}

TEST_CASE("nonfinite deviance aborts the run") {
  NanDevianceToy model;
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.burn_in = 0;
  cfg.iterations = 5;
  CHECK_THROWS_AS(run_chains(model, cfg), NonfiniteDeviance);
}

TEST_CASE("gaussian block moments match the scalar conjugate formula") {
  GaussianTerms t;
  t.prior_mean = Eigen::VectorXd::Zero(1);
  t.prior_precision = Eigen::MatrixXd::Constant(1, 1, 1e-4);
  t.obs_precision = Eigen::MatrixXd::Constant(1, 1, 4.0);
  t.obs_weighted = Eigen::VectorXd::Constant(1, 8.0);  // four observations of mean 2

  auto [mean, cov] = gaussian_block_moments(t);
  CHECK(mean(0) == doctest::Approx(8.0 / 4.0001).epsilon(1e-12));
  CHECK(cov(0, 0) == doctest::Approx(1.0 / 4.0001).epsilon(1e-12));

  Rng rng(17);
  const int n = 40000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = update_gaussian_block(t, rng)(0);
    acc += v;
    acc2 += v * v;
  }
  const double mc_mean = acc / n;
  const double mc_var = acc2 / n - mc_mean * mc_mean;
  CHECK(std::abs(mc_mean - mean(0)) < 3.0 * std::sqrt(cov(0, 0) / n));
  CHECK(mc_var == doctest::Approx(cov(0, 0)).epsilon(0.05));
}

TEST_CASE("gaussian block with no observations draws from the prior") {
  GaussianTerms t;
  t.prior_mean = Eigen::VectorXd::Constant(2, 3.0);
  t.prior_precision = Eigen::MatrixXd::Identity(2, 2) * 4.0;
  t.obs_precision = Eigen::MatrixXd::Zero(2, 2);
  t.obs_weighted = Eigen::VectorXd::Zero(2);
  auto [mean, cov] = gaussian_block_moments(t);
  CHECK((mean - t.prior_mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cov - Eigen::MatrixXd::Identity(2, 2) * 0.25).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("near-infinite prior precision pins the sampled component") {
  GaussianTerms t;
  t.prior_mean = Eigen::VectorXd::Zero(2);
  t.prior_mean(0) = 5.0;
  t.prior_precision = Eigen::MatrixXd::Zero(2, 2);
  t.prior_precision(0, 0) = 1e12;
  t.prior_precision(1, 1) = 1.0;
  t.obs_precision = Eigen::MatrixXd::Identity(2, 2);
  t.obs_weighted = Eigen::VectorXd::Constant(2, 2.0);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x = update_gaussian_block(t, rng);
    CHECK(std::abs(x(0) - 5.0) < 1e-5);
  }
}

TEST_CASE("gaussian block rejects non positive definite precision") {
  GaussianTerms t;
  t.prior_mean = Eigen::VectorXd::Zero(1);
  t.prior_precision = Eigen::MatrixXd::Constant(1, 1, -1.0);
  t.obs_precision = Eigen::MatrixXd::Zero(1, 1);
  t.obs_weighted = Eigen::VectorXd::Zero(1);
  Rng rng(1);
  CHECK_THROWS_AS(update_gaussian_block(t, rng), NotPositiveDefinite);
}

TEST_CASE("metropolis scalar explores a standard normal and tunes acceptance") {
  auto logpost = [](double v) { return -0.5 * v * v; };
  AdaptiveStep step;
  Rng rng(23);

  double x = 3.0;
  for (int i = 0; i < 2000; ++i) x = update_metropolis_scalar(x, logpost, step, true, rng).first;
  const double frozen = step.step;

  long accepted = 0;
  const int n = 60000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto [v, ok] = update_metropolis_scalar(x, logpost, step, false, rng);
    x = v;
    if (ok) ++accepted;
    acc += x;
    acc2 += x * x;
  }
  CHECK(step.step == frozen);  // adaptation is frozen outside burn-in

  const double rate = static_cast<double>(accepted) / n;
  CHECK(rate > 0.25);
  CHECK(rate < 0.6);

  // Autocorrelation-inflated standard error; factor 10 is ample at this rate.
  const double mean = acc / n;
  const double var = acc2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(10.0 / n));
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("flat target always accepts") {
  auto logpost = [](double) { return 0.0; };
  AdaptiveStep step;
  Rng rng(2);
  double x = 0.0;
  for (int i = 0; i < 500; ++i) {
    auto [v, ok] = update_metropolis_scalar(x, logpost, step, false, rng);
    CHECK(ok);
    x = v;
  }
  auto broken = [](double) { return std::nan(""); };
  CHECK_THROWS_AS(update_metropolis_scalar(0.0, broken, step, false, rng), NonfiniteLogPosterior);
}

TEST_CASE("slice sampler is uniform on a flat bounded target") {
  auto logpost = [](double) { return 1.0; };
  Rng rng(31);
  const double lo = 0.01, hi = 100.0;
  const int n = 10000;
  std::vector<double> xs(n);
  double x = 1.0;
  for (int i = 0; i < n; ++i) {
    x = update_sigma_slice(x, logpost, lo, hi, rng);
    CHECK(x >= lo);
    CHECK(x <= hi);
    xs[i] = x;
  }
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = (xs[i] - lo) / (hi - lo);
    ks = std::max(ks, std::abs(u - (i + 1.0) / n));
    ks = std::max(ks, std::abs(u - static_cast<double>(i) / n));
  }
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("slice sampler concentrates on a sharp interior peak") {
  const double peak = 2.5, sd = 0.05;
  auto logpost = [&](double v) { return -0.5 * (v - peak) * (v - peak) / (sd * sd); };
  Rng rng(41);
  double x = 50.0;
  double acc = 0.0;
  const int burn = 200, n = 20000;
  for (int i = 0; i < burn; ++i) x = update_sigma_slice(x, logpost, 0.01, 100.0, rng);
  for (int i = 0; i < n; ++i) {
    x = update_sigma_slice(x, logpost, 0.01, 100.0, rng);
    acc += x;
  }
  CHECK(std::abs(acc / n - peak) < 3.0 * sd / std::sqrt(static_cast<double>(n) / 10.0));

  CHECK_THROWS_AS(update_sigma_slice(200.0, logpost, 0.01, 100.0, rng), BoundsViolation);
}

TEST_CASE("split rhat separates mixed and unmixed chains") {
  Rng rng(8);
  const int n = 5000;
  Eigen::VectorXd c1(n), c2(n);
  for (int i = 0; i < n; ++i) {
    c1(i) = rng.normal();
    c2(i) = rng.normal();
  }
  const double mixed = compute_rhat({c1, c2});
  CHECK(mixed >= 0.99);
  CHECK(mixed < 1.02);

  Eigen::VectorXd shifted = c2.array() + 10.0;
  CHECK(compute_rhat({c1, shifted}) > 1.5);

  // 3.25 sums exactly, so both variance components are zero and the guard
  // returns 1. A constant whose mean rounds (3.33) leaves a tiny within-split
  // variance and an exactly zero between-split variance, giving sqrt(49/50).
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(100, 3.25);
  CHECK(compute_rhat({flat, flat}) == 1.0);
  Eigen::VectorXd flat2 = Eigen::VectorXd::Constant(100, 3.33);
  const double degenerate = compute_rhat({flat2, flat2});
  CHECK(degenerate >= std::sqrt(49.0 / 50.0) - 1e-12);
  CHECK(degenerate <= 1.0 + 1e-12);

  CHECK_THROWS_AS(compute_rhat({c1}), InsufficientDraws);
  CHECK_THROWS_AS(compute_rhat({Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)}), InsufficientDraws);
}

TEST_CASE("effective sample size is near the draw count for independent draws") {
  Rng rng(88);
  const int n = 4000;
  Eigen::VectorXd c1(n), c2(n);
  for (int i = 0; i < n; ++i) {
    c1(i) = rng.normal();
    c2(i) = rng.normal();
  }
  const double ess = compute_ess({c1, c2});
  CHECK(ess > 0.5 * 2 * n);
  CHECK(ess <= 2.0 * n * 1.05);
}

TEST_CASE("dic identities") {
  Eigen::VectorXd dev(3);
  dev << 10.0, 12.0, 14.0;
  DicResult r = compute_dic(dev, 11.0);
  CHECK(r.dbar == doctest::Approx(12.0));
  CHECK(r.pd == doctest::Approx(1.0));
  CHECK(r.dic == doctest::Approx(13.0));
  CHECK(r.pd == doctest::Approx(r.dbar - 11.0));  // identity by construction
  CHECK_FALSE(r.negative_pd);

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 42.0);
  r = compute_dic(flat, 42.0);
  CHECK(r.pd == doctest::Approx(0.0));
  CHECK(r.dic == doctest::Approx(42.0));

  r = compute_dic(flat, 43.0);
  CHECK(r.negative_pd);

  CHECK_THROWS_AS(compute_dic(Eigen::VectorXd(), 0.0), EmptyDraws);
}

TEST_CASE("summaries pool chains with interpolated quantiles") {
  ChainSet cs;
  cs.names = {"p"};
  cs.draws.resize(2);
  cs.deviance.resize(2);
  cs.draws[0].resize(50, 1);
  cs.draws[1].resize(50, 1);
  for (int i = 0; i < 50; ++i) {
    cs.draws[0](i, 0) = i + 1.0;
    cs.draws[1](i, 0) = i + 51.0;
  }
  cs.deviance[0] = Eigen::VectorXd::Zero(50);
  cs.deviance[1] = Eigen::VectorXd::Zero(50);

  auto rows = summarize(cs, {0.025, 0.5, 0.975});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean == doctest::Approx(50.5));
  CHECK(rows[0].quantiles[0] == doctest::Approx(3.475));
  CHECK(rows[0].quantiles[1] == doctest::Approx(50.5));  // symmetric draws: median = mean
  CHECK(rows[0].quantiles[2] == doctest::Approx(97.525));

  ChainSet single;
  single.names = {"p"};
  single.draws.resize(1);
  single.draws[0] = Eigen::MatrixXd::Constant(1, 1, 4.25);
  single.deviance.resize(1);
  single.deviance[0] = Eigen::VectorXd::Zero(1);
  auto one = summarize(single, {0.5});
  CHECK(one[0].mean == doctest::Approx(4.25));
  CHECK(one[0].sd == doctest::Approx(0.0));
}

TEST_CASE("partition comparison sorts by dic then dbar then label") {
  std::vector<PartitionScore> fits = {{"a", 12.0, 13.0}, {"b", 10.0, 11.0}, {"c", 11.5, 12.0}};
  auto ranked = compare_partitions(fits);
  CHECK(ranked[0].dic == doctest::Approx(11.0));
  CHECK(ranked[1].dic == doctest::Approx(12.0));
  CHECK(ranked[2].dic == doctest::Approx(13.0));

  std::vector<PartitionScore> tie = {{"x", 5.0, 20.0}, {"y", 4.0, 20.0}};
  ranked = compare_partitions(tie);
  CHECK(ranked[0].label == "y");

  std::vector<PartitionScore> onefit = {{"only", 1.0, 2.0}};
  CHECK(compare_partitions(onefit)[0].label == "only");
}

TEST_CASE("indicator gibbs matches the enumerated joint posterior") {
  const double y1 = 0.8, y2 = -1.5, spike = 50.0, slab = 0.5, p0 = 0.5;
  SpikeSlabToy model(y1, y2, spike, slab, p0);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.burn_in = 500;
  cfg.iterations = 8000;
  cfg.seed = 1234;

  ChainSet cs = run_chains(model, cfg);

  // Closed form: marginal likelihood under each state is N(y; 0, 1 + 1/prec).
  auto spike_prob = [&](double y) {
    const double ms = normal_density(y, 0.0, 1.0 + 1.0 / spike);
    const double mb = normal_density(y, 0.0, 1.0 + 1.0 / slab);
    return p0 * ms / (p0 * ms + (1.0 - p0) * mb);
  };
  const double p1 = spike_prob(y1);
  const double p2 = spike_prob(y2);

  Eigen::VectorXd i1 = cs.pooled(2);
  Eigen::VectorXd i2 = cs.pooled(3);
  double f11 = 0.0, f10 = 0.0, f01 = 0.0, f00 = 0.0;
  for (Eigen::Index i = 0; i < i1.size(); ++i) {
    if (i1(i) == 1.0 && i2(i) == 1.0) f11 += 1.0;
    else if (i1(i) == 1.0) f10 += 1.0;
    else if (i2(i) == 1.0) f01 += 1.0;
    else f00 += 1.0;
  }
  const double n = static_cast<double>(i1.size());
  CHECK(std::abs(f11 / n - p1 * p2) < 0.02);
  CHECK(std::abs(f10 / n - p1 * (1.0 - p2)) < 0.02);
  CHECK(std::abs(f01 / n - (1.0 - p1) * p2) < 0.02);
  CHECK(std::abs(f00 / n - (1.0 - p1) * (1.0 - p2)) < 0.02);
}

TEST_CASE("overdispersed starts converge on a conjugate target") {
  Eigen::VectorXd y(6);
  y << 0.4, -0.2, 0.1, 0.3, -0.5, 0.0;
  ConjugateToy model(y);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.burn_in = 500;
  cfg.iterations = 5000;
  cfg.seed = 99;
  ChainSet cs = run_chains(model, cfg);
  Diagnostics d = diagnostics(cs);
  CHECK(d.rhat[0] < 1.05);
}

TEST_CASE("metropolis acceptance rates are reported per labeled block") {
  MetropolisToy model;
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.burn_in = 1000;
  cfg.iterations = 5000;
  cfg.seed = 11;
  ChainSet cs = run_chains(model, cfg);
  REQUIRE(cs.accept_rates.size() == 1);
  CHECK(cs.accept_rates[0].first == "x");
  CHECK(cs.accept_rates[0].second > 0.25);
  CHECK(cs.accept_rates[0].second < 0.6);

  Diagnostics d = diagnostics(cs);
  CHECK(d.rhat[0] < 1.05);
}

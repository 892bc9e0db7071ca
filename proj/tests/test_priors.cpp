#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "gmcborrow/priors.hpp"
#include "gmcborrow/rng.hpp"

using namespace gmc;

TEST_CASE("gaussian log density hand values") {
  CHECK(gaussian_logdensity(0.0, 0.0, 1.0) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(gaussian_logdensity(1.0, 0.0, 2.0) == doctest::Approx(-1.5723649429247).epsilon(1e-12));
  for (double m : {-3.0, 0.0, 11.5}) {
    CHECK(gaussian_logdensity(m, m, 4.0) ==
          doctest::Approx(0.5 * std::log(4.0 / (2.0 * M_PI))).epsilon(1e-14));
  }
  CHECK_THROWS_AS(gaussian_logdensity(0.0, 0.0, 0.0), NonpositivePrecision);
  CHECK_THROWS_AS(gaussian_logdensity(0.0, 0.0, -1.0), NonpositivePrecision);
}

TEST_CASE("hyperparameter validation rejects inconsistent settings") {
  CommensurateHyper ch;
  CHECK_NOTHROW(ch.validate());
  ch.s_u = ch.s_l;
  CHECK_THROWS_AS(ch.validate(), ConfigError);
  ch = CommensurateHyper{};
  ch.p0 = 1.5;
  CHECK_THROWS_AS(ch.validate(), ConfigError);

  GmcHyper gh;
  CHECK_NOTHROW(gh.validate());
  gh.R = 0.0;
  CHECK_THROWS_AS(gh.validate(), ConfigError);
  gh = GmcHyper{};
  gh.a1 = 0.0;
  CHECK_THROWS_AS(gh.validate(), ConfigError);
}

TEST_CASE("spike and slab log prior selects the component by the indicator") {
  CommensurateHyper h;  // s_l=0, s_u=2, R=2000, p0=0.5

  // Spike at its own center: half the log precision-to-2pi ratio.
  CHECK(spike_slab_logprior(3.0, 3.0, 1.0, 1, h) == doctest::Approx(2.8815126965663684).epsilon(1e-12));

  // Slab at unit precision, one unit away from center.
  CHECK(spike_slab_logprior(1.0, 0.0, 1.0, 0, h) == doctest::Approx(-1.4189385332046727).epsilon(1e-13));

  CHECK_THROWS_AS(spike_slab_logprior(0.0, 0.0, 3.0, 0, h), TauOutOfSlab);
  CHECK_NOTHROW(spike_slab_logprior(0.0, 0.0, 3.0, 1, h));  // tau unused on the spike side
  CHECK_THROWS_AS(spike_slab_logprior(0.0, 0.0, 1.0, 2, h), DomainError);
}

TEST_CASE("spike and slab mixture density integrates to one") {
  CommensurateHyper h;
  const double theta0 = 0.7;
  const double tau = 1.3;

  auto density = [&](double theta) {
    return h.p0 * std::exp(spike_slab_logprior(theta, theta0, tau, 1, h)) +
           (1.0 - h.p0) * std::exp(spike_slab_logprior(theta, theta0, tau, 0, h));
  };

  // Simpson rule; the grid is fine enough to resolve the sd 1/sqrt(2000) spike.
  const double lo = theta0 - 9.0, hi = theta0 + 9.0;
  const int n = 2000000;
  const double step = (hi - lo) / n;
  double total = density(lo) + density(hi);
  for (int i = 1; i < n; ++i) total += density(lo + i * step) * (i % 2 == 1 ? 4.0 : 2.0);
  total *= step / 3.0;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("indicator probability closed forms and degenerate weights") {
  CHECK(mixture_indicator_prob(0.3, -2.0, 0.0) == 0.0);
  CHECK(mixture_indicator_prob(-5.0, 1.0, 1.0) == 1.0);
  CHECK(mixture_indicator_prob(-1.25, -1.25, 0.37) == doctest::Approx(0.37));

  // At the common center the odds reduce to the precision ratio sqrt(R/tau).
  const double ls = gaussian_logdensity(0.0, 0.0, 2000.0);
  const double lb = gaussian_logdensity(0.0, 0.0, 1.0);
  const double expect = std::sqrt(2000.0) / (std::sqrt(2000.0) + 1.0);
  CHECK(mixture_indicator_prob(ls, lb, 0.5) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(expect == doctest::Approx(0.97813).epsilon(5e-5));
}

TEST_CASE("indicator probability is monotone bounded and stable at huge gaps") {
  double prev = -1.0;
  for (double gap = -700.0; gap <= 700.0; gap += 35.0) {
    double p = mixture_indicator_prob(gap, 0.0, 0.5);
    CHECK(std::isfinite(p));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(mixture_indicator_prob(700.0, 0.0, 0.5) == doctest::Approx(1.0));
  // A log-sum-exp implementation yields roughly e^-700, tiny but nonzero.
  CHECK(mixture_indicator_prob(-700.0, 0.0, 0.5) <= 1e-300);

  prev = -1.0;
  for (double w = 0.0; w <= 1.0; w += 0.1) {
    double p = mixture_indicator_prob(1.0, 0.0, w);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("matched spike and slab precision returns the prior weight for any point") {
  CommensurateHyper h;
  h.s_u = 3000.0;  // admit tau = R inside the slab support
  for (double theta : {-2.0, 0.0, 0.31, 5.0}) {
    double ls = spike_slab_logprior(theta, 0.5, 2000.0, 1, h);
    double lb = spike_slab_logprior(theta, 0.5, 2000.0, 0, h);
    CHECK(mixture_indicator_prob(ls, lb, 0.25) == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("borrowing weight full conditional is the conjugate Beta update") {
  GmcHyper h;  // a1 = a2 = 0.5
  BetaParams bp = nu_full_conditional({1, 1, 0, 1, 1, 1, 1, 0, 0, 1}, h);
  CHECK(bp.a == doctest::Approx(7.5));
  CHECK(bp.b == doctest::Approx(3.5));

  GmcHyper skew;
  skew.a1 = 0.1;
  skew.a2 = 0.9;
  bp = nu_full_conditional(std::vector<int>(10, 0), skew);
  CHECK(bp.a == doctest::Approx(0.1));
  CHECK(bp.b == doctest::Approx(10.9));

  // Exhaustive enumeration: the update depends on the indicators only through their sum.
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<int> iota = {(mask >> 0) & 1, (mask >> 1) & 1, (mask >> 2) & 1};
    int s = iota[0] + iota[1] + iota[2];
    BetaParams e = nu_full_conditional(iota, h);
    CHECK(e.a == doctest::Approx(h.a1 + s));
    CHECK(e.b == doctest::Approx(h.a2 + 3 - s));
  }

  CHECK_THROWS_AS(nu_full_conditional({}, h), DimensionMismatch);
  CHECK_THROWS_AS(nu_full_conditional({0, 2}, h), DomainError);
}

TEST_CASE("sampled borrowing weight matches the conjugate mean") {
  GmcHyper h;
  std::vector<int> iota = {1, 1, 0, 1, 1, 1, 1, 0, 0, 1};
  BetaParams bp = nu_full_conditional(iota, h);
  const double mean = bp.a / (bp.a + bp.b);
  const double var = bp.a * bp.b / ((bp.a + bp.b) * (bp.a + bp.b) * (bp.a + bp.b + 1.0));

  Rng rng(99);
  const int n = 20000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += rng.beta(bp.a, bp.b);
  const double se = std::sqrt(var / n);
  CHECK(std::abs(acc / n - mean) < 3.0 * se);
}

TEST_CASE("random walk log prior accumulates a vague head and increment terms") {
  Eigen::VectorXd g1(1);
  g1 << 0.4;
  CHECK(random_walk_logprior(g1, 2.0) == doctest::Approx(gaussian_logdensity(0.4, 0.0, 1e-4)).epsilon(1e-14));

  Eigen::VectorXd g2(2);
  g2 << 0.0, 1.0;
  const double expect = 0.5 * std::log(1e-4 / (2.0 * M_PI)) + (-0.9189385332046727 - 0.5);
  CHECK(random_walk_logprior(g2, 1.0) == doctest::Approx(expect).epsilon(1e-13));

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 1.7);
  const double sigma = 0.3;
  const double inc = 0.5 * std::log(1.0 / (2.0 * M_PI * sigma * sigma));
  CHECK(random_walk_logprior(flat, sigma) ==
        doctest::Approx(gaussian_logdensity(1.7, 0.0, 1e-4) + 4.0 * inc).epsilon(1e-12));

  CHECK_THROWS_AS(random_walk_logprior(g2, 0.0), NonpositiveSigma);
  CHECK_THROWS_AS(random_walk_logprior(Eigen::VectorXd(), 1.0), DimensionMismatch);
}

TEST_CASE("curve prior under full borrowing is a product of spikes") {
  GmcHyper h;
  const int K = 6;
  Eigen::VectorXd b(K);
  b << 0.3, -1.0, 2.0, 0.0, 0.7, -0.2;
  IndicatorState s;
  s.iota.assign(K, 1);
  const double expect = K * 0.5 * std::log(h.R / (2.0 * M_PI));
  CHECK(gmc_curve_logprior(b, b, s, 1.0, h) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("curve prior with no borrowing reduces to the conventional prior") {
  GmcHyper h;
  const int K = 5;
  Rng rng(5);
  Eigen::VectorXd b(K), b0(K);
  for (int k = 0; k < K; ++k) {
    b(k) = rng.normal();
    b0(k) = rng.normal();
  }
  IndicatorState s;
  s.iota.assign(K, 0);
  const double sigma_b = 0.8;

  double expect = gaussian_logdensity(b(0), 0.0, 1e-4);
  for (int k = 1; k < K; ++k) expect += gaussian_logdensity(b(k), 0.0, 1.0 / (sigma_b * sigma_b));
  CHECK(gmc_curve_logprior(b, b0, s, sigma_b, h) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("single component curve prior is a spike slab with a vague slab") {
  GmcHyper h;
  Eigen::VectorXd b(1), b0(1);
  b << 1.4;
  b0 << -0.3;

  IndicatorState spike;
  spike.iota = {1};
  CHECK(gmc_curve_logprior(b, b0, spike, 1.0, h) ==
        doctest::Approx(gaussian_logdensity(1.4, -0.3, h.R)).epsilon(1e-13));

  IndicatorState slab;
  slab.iota = {0};
  CHECK(gmc_curve_logprior(b, b0, slab, 1.0, h) ==
        doctest::Approx(gaussian_logdensity(1.4, 0.0, 1e-4)).epsilon(1e-13));
}

TEST_CASE("curve prior rejects mismatched lengths") {
  GmcHyper h;
  IndicatorState s;
  s.iota = {0, 1};
  CHECK_THROWS_AS(gmc_curve_logprior(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), s, 1.0, h),
                  DimensionMismatch);
  CHECK_THROWS_AS(gmc_curve_logprior(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), s, 1.0, h),
                  DimensionMismatch);
}

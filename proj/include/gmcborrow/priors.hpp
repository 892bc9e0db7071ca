#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gmcborrow/errors.hpp"

namespace gmc {

// Precision of the vague N(0, 1e4) prior used for intercept-like parameters.
inline constexpr double kVaguePrecision = 1e-4;

// Lower and upper bounds of the U(0.01, 100) prior shared by all scale parameters.
inline constexpr double kSigmaLower = 0.01;
inline constexpr double kSigmaUpper = 100.0;

// Spike-and-slab commensurate prior on an intercept-like parameter:
// spike N(theta0, 1/R) with weight p0, slab N(theta0, 1/tau) with tau ~ U(s_l, s_u).
struct CommensurateHyper {
  double s_l = 0.0;
  double s_u = 2.0;
  double R = 2000.0;
  double p0 = 0.5;
  void validate() const;
};

// Mixture-commensurate prior on the remaining curve coefficients: shared borrowing
// weight nu ~ Beta(a1, a2), per-coefficient spike N(theta0_k, 1/R).
struct GmcHyper {
  double R = 2000.0;
  double a1 = 0.5;
  double a2 = 0.5;
  void validate() const;
};

struct IndicatorState {
  std::vector<int> iota;
  double nu = 0.5;
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

// log N(x | mean, precision^{-1}); throws NonpositivePrecision.
double gaussian_logdensity(double x, double mean, double precision);

// Log prior density of theta under the commensurate mixture at a fixed indicator:
// iota = 1 spike N(theta0, 1/R), iota = 0 slab N(theta0, 1/tau).
double spike_slab_logprior(double theta, double theta0, double tau, int iota, const CommensurateHyper& h);

// P(iota = 1 | rest) from the two conditional log densities and the prior weight.
// Exact at prior weights 0 and 1; stable for log-density gaps of +-700.
double mixture_indicator_prob(double log_spike, double log_slab, double prior_spike);

// nu | iota ~ Beta(a1 + sum(iota), a2 + K - sum(iota)).
BetaParams nu_full_conditional(const std::vector<int>& iota, const GmcHyper& h);

// First-order random walk: gamma_1 ~ N(0, 1e4), gamma_k ~ N(gamma_{k-1}, sigma^2).
double random_walk_logprior(const Eigen::VectorXd& gamma, double sigma);

// Joint log prior of the non-intercept curve coefficients b_1..b_K given
// indicators: spike N(b0_k, 1/R); slab is vague for b_1 and N(0, sigma_b^2) for
// k >= 2.
double gmc_curve_logprior(const Eigen::VectorXd& b, const Eigen::VectorXd& b0, const IndicatorState& s,
                          double sigma_b, const GmcHyper& h);

}  // namespace gmc

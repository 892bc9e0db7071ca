#include "gmcborrow/priors.hpp"

#include <algorithm>
#include <cmath>

namespace gmc {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

void CommensurateHyper::validate() const {
  if (!(s_l >= 0.0 && s_l < s_u)) throw ConfigError("slab precision bounds need 0 <= s_l < s_u");
  if (!(R > 0.0)) throw ConfigError("spike precision R must be positive");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ConfigError("prior weight p0 outside [0,1]");
}

void GmcHyper::validate() const {
  if (!(R > 0.0)) throw ConfigError("spike precision R must be positive");
  if (!(a1 > 0.0 && a2 > 0.0)) throw ConfigError("Beta prior parameters must be positive");
}

double gaussian_logdensity(double x, double mean, double precision) {
  if (!(precision > 0.0)) throw NonpositivePrecision("precision must be positive");
  const double d = x - mean;
  return 0.5 * (std::log(precision) - kLogTwoPi) - 0.5 * precision * d * d;
}

double spike_slab_logprior(double theta, double theta0, double tau, int iota, const CommensurateHyper& h) {
  h.validate();
  if (iota != 0 && iota != 1) throw DomainError("indicator must be 0 or 1");
  if (iota == 1) return gaussian_logdensity(theta, theta0, h.R);
  if (!(tau >= h.s_l && tau <= h.s_u)) throw TauOutOfSlab("tau outside its uniform support");
  return gaussian_logdensity(theta, theta0, tau);
}

double mixture_indicator_prob(double log_spike, double log_slab, double prior_spike) {
  if (!(prior_spike >= 0.0 && prior_spike <= 1.0)) throw DomainError("prior weight outside [0,1]");
  if (prior_spike <= 0.0) return 0.0;
  if (prior_spike >= 1.0) return 1.0;
  if (log_spike == log_slab) return prior_spike;  // equal evidence returns the prior weight
  const double a = std::log(prior_spike) + log_spike;
  const double b = std::log1p(-prior_spike) + log_slab;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  return ea / (ea + eb);
}

BetaParams nu_full_conditional(const std::vector<int>& iota, const GmcHyper& h) {
  h.validate();
  if (iota.empty()) throw DimensionMismatch("no indicators");
  int sum = 0;
  for (int v : iota) {
    if (v != 0 && v != 1) throw DomainError("indicator must be 0 or 1");
    sum += v;
  }
  return BetaParams{h.a1 + sum, h.a2 + static_cast<double>(iota.size()) - sum};
}

double random_walk_logprior(const Eigen::VectorXd& gamma, double sigma) {
  if (gamma.size() < 1) throw DimensionMismatch("empty coefficient vector");
  if (!(sigma > 0.0)) throw NonpositiveSigma("random-walk scale must be positive");
  double lp = gaussian_logdensity(gamma(0), 0.0, kVaguePrecision);
  const double prec = 1.0 / (sigma * sigma);
  for (Eigen::Index k = 1; k < gamma.size(); ++k) lp += gaussian_logdensity(gamma(k), gamma(k - 1), prec);
  return lp;
}

double gmc_curve_logprior(const Eigen::VectorXd& b, const Eigen::VectorXd& b0, const IndicatorState& s,
                          double sigma_b, const GmcHyper& h) {
  h.validate();
  const Eigen::Index K = b.size();
  if (b0.size() != K || static_cast<Eigen::Index>(s.iota.size()) != K)
    throw DimensionMismatch("coefficient and indicator lengths differ");
  if (!(sigma_b > 0.0)) throw NonpositiveSigma("slab scale must be positive");
  const double slab_prec = 1.0 / (sigma_b * sigma_b);
  double lp = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (s.iota[static_cast<std::size_t>(k)] == 1)
      lp += gaussian_logdensity(b(k), b0(k), h.R);
    else
      lp += gaussian_logdensity(b(k), 0.0, k == 0 ? kVaguePrecision : slab_prec);
  }
  return lp;
}

}  // namespace gmc

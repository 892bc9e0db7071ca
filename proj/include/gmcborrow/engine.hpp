#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gmcborrow/priors.hpp"
#include "gmcborrow/rng.hpp"

namespace gmc {

struct SamplerConfig {
  int chains = 2;
  int burn_in = 1000;
  int iterations = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  void validate() const;  // throws ConfigError
};

// Posterior draws, stored per chain as (stored iterations x parameters).
struct ChainSet {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> draws;
  std::vector<Eigen::VectorXd> deviance;
  std::vector<std::pair<std::string, double>> accept_rates;
  std::vector<std::string> warnings;

  int n_chains() const { return static_cast<int>(draws.size()); }
  int n_stored() const { return draws.empty() ? 0 : static_cast<int>(draws[0].rows()); }
  int n_params() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // -1 when absent
  Eigen::VectorXd pooled(int param) const;      // chains stacked in chain order
  Eigen::VectorXd pooled_deviance() const;
  Eigen::VectorXd posterior_mean() const;
};

// Gaussian full conditional assembled from prior moments plus accumulated
// Gaussian observation terms (X'X-style precision and X'y-style weighted sums).
struct GaussianTerms {
  Eigen::VectorXd prior_mean;
  Eigen::MatrixXd prior_precision;
  Eigen::MatrixXd obs_precision;
  Eigen::VectorXd obs_weighted;
};

struct IndicatorOdds {
  double log_spike = 0.0;
  double log_slab = 0.0;
  double prior_spike = 0.5;
};

struct GaussianBlock {
  std::vector<int> indices;
  std::function<GaussianTerms(const Eigen::VectorXd&)> terms;
};

// make_logpost builds a one-dimensional log posterior with everything that does
// not depend on the candidate precomputed from the current state.
struct MetropolisBlock {
  int index = 0;
  std::string label;
  double initial_step = 0.5;
  std::function<std::function<double(double)>(const Eigen::VectorXd&)> make_logpost;
};

struct SliceBlock {
  int index = 0;
  double lower = kSigmaLower;
  double upper = kSigmaUpper;
  std::function<std::function<double(double)>(const Eigen::VectorXd&)> make_logpost;
};

// Proposes one shared offset added to both coordinates. Tightly tied pairs
// have a near-degenerate ridge along (1,1); single-site moves crawl across it
// while a shared shift walks along it. make_logpost maps the offset to the
// log posterior change.
struct PairShiftBlock {
  int index_a = 0;
  int index_b = 0;
  std::string label;
  double initial_step = 0.5;
  std::function<std::function<double(double)>(const Eigen::VectorXd&)> make_logpost;
};

// One Metropolis flip of a two-state indicator that jumps the governed
// coefficient at the same time, drawing it from a proposal matched to the
// destination state. Without the jump a coordinate parked in a sharp
// component can never leave it, because the flip odds are evaluated at the
// current coefficient. plan supplies the per-state proposal moments and the
// joint log posterior restricted to the pair.
struct FlipJumpPlan {
  double mean0 = 0.0;
  double sd0 = 1.0;
  double mean1 = 0.0;
  double sd1 = 1.0;
  std::function<double(double, double)> logpost;  // (indicator, coefficient)
};

struct FlipJumpBlock {
  int index_ind = 0;
  int index_coef = 0;
  std::function<FlipJumpPlan(const Eigen::VectorXd&)> plan;
};

struct IndicatorBlock {
  int index = 0;
  std::function<IndicatorOdds(const Eigen::VectorXd&)> odds;
};

struct BetaConjugateBlock {
  int index = 0;
  std::function<BetaParams(const Eigen::VectorXd&)> params;
};

using Block = std::variant<GaussianBlock, MetropolisBlock, PairShiftBlock, FlipJumpBlock, SliceBlock, IndicatorBlock,
                           BetaConjugateBlock>;

// A model is a parameter naming, an initializer, a block decomposition, and a
// deviance. Blocks are updated in the order returned, once per sweep.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;
  virtual const std::vector<std::string>& parameter_names() const = 0;
  virtual Eigen::VectorXd initial_state(int chain, Rng& rng) const = 0;
  virtual std::vector<Block> blocks() const = 0;
  virtual double deviance(const Eigen::VectorXd& state) const = 0;
};

// Runs config.chains independent chains on derived seed streams; adaptation is
// active during burn-in only, so the kept draws come from a fixed kernel.
ChainSet run_chains(const PosteriorModel& model, const SamplerConfig& config);

// Exact moments of the Gaussian full conditional (mean, covariance).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_block_moments(const GaussianTerms& t);

// One exact draw from the Gaussian full conditional.
Eigen::VectorXd update_gaussian_block(const GaussianTerms& t, Rng& rng);

// Random-walk step size adapted toward 0.44 acceptance by Robbins-Monro during
// burn-in; frozen afterwards.
struct AdaptiveStep {
  double step = 0.5;
  long updates = 0;
};

std::pair<double, bool> update_metropolis_scalar(double current, const std::function<double(double)>& logpost,
                                                 AdaptiveStep& step, bool adapt, Rng& rng);

// Doubly-bounded slice sampler (shrinkage from the full interval).
double update_sigma_slice(double current, const std::function<double(double)>& logpost, double lower,
                          double upper, Rng& rng);

// Split-chain potential scale reduction.
double compute_rhat(const std::vector<Eigen::VectorXd>& chains);

// Effective sample size via Geyer initial monotone positive sequence.
double compute_ess(const std::vector<Eigen::VectorXd>& chains);

struct Diagnostics {
  std::vector<double> rhat;
  std::vector<double> ess;
  std::vector<std::pair<std::string, double>> accept_rates;
};

Diagnostics diagnostics(const ChainSet& cs);

struct DicResult {
  double dbar = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  bool negative_pd = false;
};

DicResult compute_dic(const Eigen::VectorXd& deviance_draws, double deviance_at_mean);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> quantiles;
};

std::vector<SummaryRow> summarize(const ChainSet& cs, const std::vector<double>& probabilities);

struct PartitionScore {
  std::string label;
  double dbar = 0.0;
  double dic = 0.0;
};

// Ranked by (dic, dbar, label); deterministic total order.
std::vector<PartitionScore> compare_partitions(std::vector<PartitionScore> fits);

}  // namespace gmc

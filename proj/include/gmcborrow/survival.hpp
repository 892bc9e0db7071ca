#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmcborrow/engine.hpp"
#include "gmcborrow/regression.hpp"
#include "gmcborrow/spline.hpp"

namespace gmc {

// Right-censored times rescaled to (0, 1]; optional binary treatment indicators.
// Supplemental data carry no treatment indicators.
struct SurvivalDataset {
  Eigen::VectorXd time;
  std::vector<int> event;
  bool has_covariates = false;
  std::vector<int> zF;
  std::vector<int> zI;
  Source source = Source::primary;

  int n() const { return static_cast<int>(time.size()); }
  int n_events() const;
  void validate() const;
};

struct PweParams {
  Eigen::VectorXd gamma;  // log hazard per interval, length K
  Eigen::VectorXd rho;    // log hazard ratios, ordered (F, I); may be empty
};

// days / horizon; throws NegativeTime for nonpositive entries, OutOfHorizon when
// a time exceeds the horizon.
Eigen::VectorXd rescale_time(const Eigen::VectorXd& days, double horizon);

// Piecewise-constant-hazard log likelihood with intervals right-closed at the
// partition knots.
double pwe_loglik(const PweParams& params, const SurvivalDataset& data, const Partition& p);

ChainSet fit_pwe_conventional(const SurvivalDataset& data, const Partition& p, const SamplerConfig& config);

// Two-source fit: supplemental log hazards gamma0 follow their own random walk;
// primary gamma_k either borrows (spike at gamma0_k, precision R) or follows the
// conventional random-walk prior, with a shared borrowing weight nu_gamma.
ChainSet fit_pwe_gmc(const SurvivalDataset& primary, const SurvivalDataset& supplemental,
                     const GmcHyper& hyper, const Partition& p, const SamplerConfig& config,
                     ForceIndicators force = ForceIndicators::none);

struct CovariateSetting {
  Source source = Source::primary;
  int zF = 0;
  int zI = 0;
};

// Pointwise posterior summary of S(t | setting) on a grid in [0, 1].
CurveSummary survival_curve(const ChainSet& cs, const Partition& p, const CovariateSetting& setting,
                            const Eigen::VectorXd& grid, double level = 0.95);

struct MedianSummary {
  double mean_days = 0.0;
  double lower_days = 0.0;
  double upper_days = 0.0;
  int excluded = 0;   // draws whose survival stays above 0.5 within the horizon
  int total = 0;
  bool censored_at_horizon = false;  // posterior-mean curve never reaches 0.5
};

// Per-draw closed-form inversion of the cumulative hazard at log 2, reported in
// days.
MedianSummary median_survival(const ChainSet& cs, const Partition& p, const CovariateSetting& setting,
                              double horizon_days, double level = 0.95);

struct HazardRatioSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// treatment is "F" or "I"; summarizes exp(rho) draws.
HazardRatioSummary hazard_ratio_summary(const ChainSet& cs, const std::string& treatment, double level = 0.95);

struct KaplanMeier {
  Eigen::VectorXd time;
  Eigen::VectorXd survival;
  std::vector<int> at_risk;
  std::vector<int> events;
};

// Product-limit estimator; one row per distinct observed time.
KaplanMeier kaplan_meier(const SurvivalDataset& data);

struct PartitionCandidate {
  std::string label;
  int K = 0;
  std::string spacing;
  Partition partition;
};

struct PartitionReport {
  std::string label;
  int K = 0;
  std::string spacing;
  double dbar = 0.0;
  double pd = 0.0;
  double dic = 0.0;
};

// Fits each candidate conventionally and ranks by DIC (ties by dbar, then label).
std::vector<PartitionReport> select_partition_dic(const SurvivalDataset& data,
                                                  const std::vector<PartitionCandidate>& candidates,
                                                  const SamplerConfig& config);

}  // namespace gmc

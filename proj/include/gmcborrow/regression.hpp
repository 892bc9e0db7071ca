#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmcborrow/engine.hpp"
#include "gmcborrow/priors.hpp"
#include "gmcborrow/spline.hpp"

namespace gmc {

enum class Source { primary, supplemental };
enum class Tissue { cancerous, noncancerous };

// Functional readings y at times t in [0,1]. The hierarchical fields (individual,
// region, tissue) are present together or absent together.
struct RegressionDataset {
  Eigen::VectorXd y;
  Eigen::VectorXd t;
  Source source = Source::primary;
  bool has_hierarchy = false;
  std::vector<int> individual;
  std::vector<int> region;
  std::vector<Tissue> tissue;

  int n() const { return static_cast<int>(y.size()); }
  void validate() const;
};

enum class ForceIndicators { none, all_zero, all_one };

struct GmcRegressionSpec {
  Partition partition;
  GmcHyper curve_hyper;              // shared-nu mixture on the non-intercept coefficients
  CommensurateHyper intercept_hyper; // spike/slab commensurate prior on the intercept
  ForceIndicators force_indicators = ForceIndicators::none;
};

struct CurveSummary {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double level = 0.95;
};

// Which posterior curve to evaluate. Two-source fits expose primary and
// supplemental; the paired-tissue fit exposes the two tissue average curves and
// one deviation curve per (tissue, individual).
struct CurveSelector {
  enum class Kind { primary, supplemental, cancerous, noncancerous, deviation };
  Kind kind = Kind::primary;
  Tissue tissue = Tissue::cancerous;
  int individual = 0;

  static CurveSelector primary() { return {Kind::primary, Tissue::cancerous, 0}; }
  static CurveSelector supplemental() { return {Kind::supplemental, Tissue::cancerous, 0}; }
  static CurveSelector cancerous() { return {Kind::cancerous, Tissue::cancerous, 0}; }
  static CurveSelector noncancerous() { return {Kind::noncancerous, Tissue::cancerous, 0}; }
  static CurveSelector deviation(Tissue tis, int ind) { return {Kind::deviation, tis, ind}; }
};

// Penalized-spline Gaussian regression of a single source; coefficients are
// sampled in the transformed (b-space) parameterization.
ChainSet fit_regression_conventional(const RegressionDataset& data, const Partition& p,
                                     const SamplerConfig& config);

// Two-source fit with the mixture-commensurate prior linking the primary curve
// coefficients to the supplemental curve.
ChainSet fit_regression_gmc(const RegressionDataset& primary, const RegressionDataset& supplemental,
                            const GmcRegressionSpec& spec, const SamplerConfig& config);

// Paired-tissue hierarchical fit: tissue average curves (cancerous borrows from
// noncancerous through the mixture-commensurate prior) plus one raw-basis
// deviation curve per (tissue, individual), regions as replicates.
ChainSet fit_ctp_gmc(const RegressionDataset& data, const GmcRegressionSpec& spec, const SamplerConfig& config);

// Pointwise posterior mean and equal-tailed interval of the selected curve on a
// grid in [0,1].
CurveSummary predict_curve(const ChainSet& cs, const Partition& p, const CurveSelector& sel,
                           const Eigen::VectorXd& grid, double level = 0.95);

// Same for the curve's first derivative.
CurveSummary predict_derivative(const ChainSet& cs, const Partition& p, const CurveSelector& sel,
                                const Eigen::VectorXd& grid, double level = 0.95);

}  // namespace gmc

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gmcborrow/errors.hpp"

namespace gmc {

enum class KnotSpacing { equal, quantile };

// Partition of [0,1]: knots t0 = 0 < t1 < ... < tK = 1. The K interior
// breakpoints t1..t(K-1) double as the radial basis centers.
struct Partition {
  Eigen::VectorXd knots;
  int intervals() const { return static_cast<int>(knots.size()) - 1; }
};

// Throws DegeneratePartition unless the knots are strictly increasing from 0 to 1
// with at least two intervals.
void validate_partition(const Partition& p);

// Equal spacing needs only K; quantile spacing places interior knots at type-7
// quantiles of t (which must hold at least K distinct values in (0,1]).
Partition build_partition(int K, KnotSpacing spacing, const Eigen::VectorXd& t = Eigen::VectorXd());

// Basis row (1, t, |t-t1|^3 - t1^3, ..., |t-t(K-1)|^3 - t(K-1)^3); length K+1.
Eigen::VectorXd eval_basis(double t, const Partition& p);

// Stacked basis rows, one per element of t; (n x K+1), and 0 x (K+1) for empty t.
Eigen::MatrixXd design_matrix(const Eigen::VectorXd& t, const Partition& p);

// Penalty factorization of Omega with entries |t_j - t_k|^3 over the radial
// centers. Omega is symmetric indefinite with a zero diagonal; the square root
// is U D^{1/2} V^T from its SVD.
struct OmegaFactor {
  Eigen::MatrixXd omega;     // (K-1) x (K-1)
  Eigen::MatrixXd sqrt;      // Omega^{1/2}
  Eigen::MatrixXd inv_sqrt;  // Omega^{-1/2}
  double condition = 0.0;
};

// Throws SingularOmega when Omega is numerically singular (condition >= 1e12);
// in particular K = 2 gives the 1x1 zero matrix and is rejected.
OmegaFactor omega_factor(const Partition& p);

// b = (beta0, beta1, Omega^{1/2} beta_radial); the inverse maps back exactly.
Eigen::VectorXd to_b_space(const Eigen::VectorXd& beta, const OmegaFactor& f);
Eigen::VectorXd from_b_space(const Eigen::VectorXd& b, const OmegaFactor& f);

// d/dt of the curve at t for raw coefficients beta: beta1 + sum_k sign(t - t_k) * 3 beta_k (t - t_k)^2,
// with sign(0) = 0.
double eval_derivative(double t, const Partition& p, const Eigen::VectorXd& beta);

// Design matrix against b-space coefficients: identity on the first two columns,
// Omega^{-1/2} applied to the radial block.
Eigen::MatrixXd b_space_design(const Eigen::VectorXd& t, const Partition& p, const OmegaFactor& f);

// Row of curve-derivative loadings against raw coefficients.
Eigen::VectorXd derivative_row(double t, const Partition& p);

// Type-7 interpolated quantile of the values (not assumed sorted), p in [0,1].
double quantile_type7(std::vector<double> values, double p);

}  // namespace gmc

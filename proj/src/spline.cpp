#include "gmcborrow/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace gmc {

namespace {
constexpr double kEdgeTol = 1e-12;

double clamp_unit(double t) {
  if (t < -kEdgeTol || t > 1.0 + kEdgeTol) throw DomainError("t outside [0,1]");
  return std::min(1.0, std::max(0.0, t));
}
}  // namespace

void validate_partition(const Partition& p) {
  const int K = p.intervals();
  if (K < 2) throw DegeneratePartition("need at least 2 intervals");
  if (p.knots(0) != 0.0 || p.knots(K) != 1.0) throw DegeneratePartition("knots must span [0,1]");
  for (int j = 1; j <= K; ++j)
    if (!(p.knots(j) > p.knots(j - 1))) throw DegeneratePartition("knots must be strictly increasing");
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw EmptyDraws("quantile of empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0,1]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= n) return values[n - 1];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Partition build_partition(int K, KnotSpacing spacing, const Eigen::VectorXd& t) {
  if (K < 2) throw DegeneratePartition("need at least 2 intervals");
  Partition p;
  p.knots.resize(K + 1);
  if (spacing == KnotSpacing::equal) {
    for (int j = 0; j <= K; ++j) p.knots(j) = static_cast<double>(j) / K;
    p.knots(0) = 0.0;
    p.knots(K) = 1.0;
  } else {
    std::set<double> distinct;
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!(t(i) > 0.0 && t(i) <= 1.0)) throw DegeneratePartition("quantile spacing needs values in (0,1]");
      vals.push_back(t(i));
      distinct.insert(t(i));
    }
    if (static_cast<int>(distinct.size()) < K)
      throw DegeneratePartition("quantile spacing needs at least K distinct values");
    p.knots(0) = 0.0;
    p.knots(K) = 1.0;
    for (int j = 1; j < K; ++j) p.knots(j) = quantile_type7(vals, static_cast<double>(j) / K);
    for (int j = 1; j <= K; ++j)
      if (!(p.knots(j) > p.knots(j - 1)))
        throw DegeneratePartition("quantile knots collapse; data too concentrated");
  }
  validate_partition(p);
  return p;
}

Eigen::VectorXd eval_basis(double t, const Partition& p) {
  validate_partition(p);
  const double x = clamp_unit(t);
  const int K = p.intervals();
  Eigen::VectorXd row(K + 1);
  row(0) = 1.0;
  row(1) = x;
  for (int k = 2; k <= K; ++k) {
    const double c = p.knots(k - 1);
    const double d = std::abs(x - c);
    row(k) = d * d * d - c * c * c;
  }
  return row;
}

Eigen::MatrixXd design_matrix(const Eigen::VectorXd& t, const Partition& p) {
  validate_partition(p);
  const int K = p.intervals();
  Eigen::MatrixXd X(t.size(), K + 1);
  for (Eigen::Index i = 0; i < t.size(); ++i) X.row(i) = eval_basis(t(i), p).transpose();
  return X;
}

OmegaFactor omega_factor(const Partition& p) {
  validate_partition(p);
  const int K = p.intervals();
  const int m = K - 1;
  OmegaFactor f;
  f.omega.resize(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) {
      const double d = std::abs(p.knots(j + 1) - p.knots(k + 1));
      f.omega(j, k) = d * d * d;
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.omega, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(m - 1);
  if (!(smin > 0.0) || smax / smin >= 1e12) throw SingularOmega("penalty matrix numerically singular");
  f.condition = smax / smin;
  f.sqrt = svd.matrixU() * sv.cwiseSqrt().asDiagonal() * svd.matrixV().transpose();
  f.inv_sqrt = svd.matrixV() * sv.cwiseSqrt().cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  return f;
}

Eigen::VectorXd to_b_space(const Eigen::VectorXd& beta, const OmegaFactor& f) {
  const Eigen::Index m = f.sqrt.rows();
  if (beta.size() != m + 2) throw DimensionMismatch("coefficient length does not match partition");
  Eigen::VectorXd b(beta.size());
  b.head(2) = beta.head(2);
  b.tail(m) = f.sqrt * beta.tail(m);
  return b;
}

Eigen::VectorXd from_b_space(const Eigen::VectorXd& b, const OmegaFactor& f) {
  const Eigen::Index m = f.sqrt.rows();
  if (b.size() != m + 2) throw DimensionMismatch("coefficient length does not match partition");
  Eigen::VectorXd beta(b.size());
  beta.head(2) = b.head(2);
  beta.tail(m) = f.inv_sqrt * b.tail(m);
  return beta;
}

Eigen::VectorXd derivative_row(double t, const Partition& p) {
  validate_partition(p);
  const double x = clamp_unit(t);
  const int K = p.intervals();
  Eigen::VectorXd row = Eigen::VectorXd::Zero(K + 1);
  row(1) = 1.0;
  for (int k = 2; k <= K; ++k) {
    const double u = x - p.knots(k - 1);
    const double s = (u > 0.0) ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    row(k) = 3.0 * s * u * u;
  }
  return row;
}

double eval_derivative(double t, const Partition& p, const Eigen::VectorXd& beta) {
  if (beta.size() != p.intervals() + 1) throw DimensionMismatch("coefficient length does not match partition");
  return derivative_row(t, p).dot(beta);
}

Eigen::MatrixXd b_space_design(const Eigen::VectorXd& t, const Partition& p, const OmegaFactor& f) {
  Eigen::MatrixXd X = design_matrix(t, p);
  const Eigen::Index m = f.inv_sqrt.rows();
  if (X.cols() != m + 2) throw DimensionMismatch("factor does not match partition");
  Eigen::MatrixXd Z(X.rows(), X.cols());
  Z.leftCols(2) = X.leftCols(2);
  Z.rightCols(m) = X.rightCols(m) * f.inv_sqrt;
  return Z;
}

}  // namespace gmc

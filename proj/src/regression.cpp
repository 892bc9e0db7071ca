#include "gmcborrow/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "gmcborrow/errors.hpp"

namespace gmc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double clamp_scale(double v) { return std::clamp(v, 0.05, 50.0); }

Eigen::VectorXd ridge_coefficients(const Eigen::MatrixXd& ZtZ, const Eigen::VectorXd& Zty) {
  Eigen::MatrixXd A = ZtZ;
  A.diagonal().array() += 1.0;
  return A.llt().solve(Zty);
}

double gaussian_deviance(double n, double ssr, double sigma) {
  return n * (kLogTwoPi + 2.0 * std::log(sigma)) + ssr / (sigma * sigma);
}

// Slice log posterior of a Gaussian scale given a sum of squares over m terms.
std::function<double(double)> scale_logpost(double m, double ss) {
  return [m, ss](double s) { return -m * std::log(s) - 0.5 * ss / (s * s); };
}

class ConventionalRegressionModel final : public PosteriorModel {
 public:
  ConventionalRegressionModel(const RegressionDataset& data, const Partition& p)
      : partition_(p), factor_(omega_factor(p)), K_(p.intervals()) {
    data.validate();
    y_ = data.y;
    Z_ = b_space_design(data.t, p, factor_);
    ZtZ_ = Z_.transpose() * Z_;
    Zty_ = Z_.transpose() * y_;
    for (int k = 0; k <= K_; ++k) names_.push_back("b[" + std::to_string(k) + "]");
    names_.push_back("sigma");
    names_.push_back("sigma_b");
    i_sigma_ = K_ + 1;
    i_sigma_b_ = K_ + 2;
  }

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s(names_.size());
    const Eigen::VectorXd bh = ridge_coefficients(ZtZ_, Zty_);
    for (int k = 0; k <= K_; ++k) s(k) = bh(k) + 0.3 * rng.normal();
    const double ssr = (y_ - Z_ * bh).squaredNorm();
    const double rsd = std::sqrt(ssr / std::max(1, static_cast<int>(y_.size())));
    s(i_sigma_) = clamp_scale(std::max(rsd, 0.05) * std::exp(0.2 * rng.normal()));
    s(i_sigma_b_) = clamp_scale(std::exp(0.5 * rng.normal()));
    return s;
  }

  std::vector<Block> blocks() const override {
    std::vector<Block> bs;
    GaussianBlock gb;
    for (int k = 0; k <= K_; ++k) gb.indices.push_back(k);
    gb.terms = [this](const Eigen::VectorXd& s) {
      GaussianTerms t;
      t.prior_mean = Eigen::VectorXd::Zero(K_ + 1);
      Eigen::VectorXd prec(K_ + 1);
      prec(0) = kVaguePrecision;
      prec(1) = kVaguePrecision;
      const double sb = s(i_sigma_b_);
      for (int k = 2; k <= K_; ++k) prec(k) = 1.0 / (sb * sb);
      t.prior_precision = prec.asDiagonal();
      const double w = 1.0 / (s(i_sigma_) * s(i_sigma_));
      t.obs_precision = ZtZ_ * w;
      t.obs_weighted = Zty_ * w;
      return t;
    };
    bs.push_back(std::move(gb));
    bs.push_back(SliceBlock{i_sigma_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ssr = (y_ - Z_ * s.head(K_ + 1)).squaredNorm();
                              return scale_logpost(static_cast<double>(y_.size()), ssr);
                            }});
    bs.push_back(SliceBlock{i_sigma_b_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ss = s.segment(2, K_ - 1).squaredNorm();
                              return scale_logpost(static_cast<double>(K_ - 1), ss);
                            }});
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    const double ssr = (y_ - Z_ * s.head(K_ + 1)).squaredNorm();
    return gaussian_deviance(static_cast<double>(y_.size()), ssr, s(i_sigma_));
  }

  Partition partition_;
  OmegaFactor factor_;
  int K_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd Z_, ZtZ_;
  Eigen::VectorXd Zty_;
  std::vector<std::string> names_;
  int i_sigma_ = 0, i_sigma_b_ = 0;
};

class GmcRegressionModel final : public PosteriorModel {
 public:
  GmcRegressionModel(const RegressionDataset& primary, const RegressionDataset& supplemental,
                     const GmcRegressionSpec& spec)
      : spec_(spec), factor_(omega_factor(spec.partition)), K_(spec.partition.intervals()) {
    primary.validate();
    supplemental.validate();
    spec_.curve_hyper.validate();
    spec_.intercept_hyper.validate();
    yp_ = primary.y;
    y0_ = supplemental.y;
    Zp_ = b_space_design(primary.t, spec.partition, factor_);
    Z0_ = b_space_design(supplemental.t, spec.partition, factor_);
    ZptZp_ = Zp_.transpose() * Zp_;
    Zpty_ = Zp_.transpose() * yp_;
    Z0tZ0_ = Z0_.transpose() * Z0_;
    Z0ty_ = Z0_.transpose() * y0_;

    for (int k = 0; k <= K_; ++k) names_.push_back("b[" + std::to_string(k) + "]");
    for (int k = 0; k <= K_; ++k) names_.push_back("b0[" + std::to_string(k) + "]");
    i_b_ = 0;
    i_b0_ = K_ + 1;
    i_sigma_ = 2 * K_ + 2;
    names_.push_back("sigma");
    i_sigma0_ = i_sigma_ + 1;
    names_.push_back("sigma0");
    i_sigma_b_ = i_sigma_ + 2;
    names_.push_back("sigma_b");
    i_sigma_b0_ = i_sigma_ + 3;
    names_.push_back("sigma_b0");
    i_iota_ = i_sigma_ + 4;
    for (int k = 0; k <= K_; ++k) names_.push_back("iota[" + std::to_string(k) + "]");
    i_nu_ = i_iota_ + K_ + 1;
    names_.push_back("nu");
    i_tau_ = i_nu_ + 1;
    names_.push_back("tau");
    tau_lower_ = std::max(spec_.intercept_hyper.s_l, 1e-12);
    tau_upper_ = spec_.intercept_hyper.s_u;
  }

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s(names_.size());
    // Ridge starts plus per-chain noise; indicators start fair unless forced.
    const Eigen::VectorXd bh = ridge_coefficients(ZptZp_, Zpty_);
    const Eigen::VectorXd b0h = ridge_coefficients(Z0tZ0_, Z0ty_);
    for (int k = 0; k <= K_; ++k) s(i_b_ + k) = bh(k) + 0.3 * rng.normal();
    for (int k = 0; k <= K_; ++k) s(i_b0_ + k) = b0h(k) + 0.3 * rng.normal();
    const double rp = std::sqrt((yp_ - Zp_ * bh).squaredNorm() / std::max(1, static_cast<int>(yp_.size())));
    const double r0 = std::sqrt((y0_ - Z0_ * b0h).squaredNorm() / std::max(1, static_cast<int>(y0_.size())));
    s(i_sigma_) = clamp_scale(std::max(rp, 0.05) * std::exp(0.2 * rng.normal()));
    s(i_sigma0_) = clamp_scale(std::max(r0, 0.05) * std::exp(0.2 * rng.normal()));
    s(i_sigma_b_) = clamp_scale(std::exp(0.5 * rng.normal()));
    s(i_sigma_b0_) = clamp_scale(std::exp(0.5 * rng.normal()));
    for (int k = 0; k <= K_; ++k) {
      double v = 0.0;
      if (spec_.force_indicators == ForceIndicators::all_one)
        v = 1.0;
      else if (spec_.force_indicators == ForceIndicators::none)
        v = static_cast<double>(rng.bernoulli(0.5));
      s(i_iota_ + k) = v;
    }
    s(i_nu_) = rng.beta(spec_.curve_hyper.a1, spec_.curve_hyper.a2);
    s(i_tau_) = tau_lower_ + (tau_upper_ - tau_lower_) * (0.05 + 0.9 * rng.uniform());
    return s;
  }

  std::vector<Block> blocks() const override {
    const bool decoupled = spec_.force_indicators == ForceIndicators::all_zero;
    const double R_int = spec_.intercept_hyper.R;
    const double R_b = spec_.curve_hyper.R;
    std::vector<Block> bs;

    // One joint draw over (b, b0). Each tie contributes a cross-precision
    // couple, so a tied pair moves along its near-degenerate ridge in a single
    // exact Gaussian update; alternating conditionals would creep across it in
    // steps of order 1/sqrt(R) and never mix.
    GaussianBlock joint;
    for (int k = 0; k <= K_; ++k) joint.indices.push_back(i_b_ + k);
    for (int k = 0; k <= K_; ++k) joint.indices.push_back(i_b0_ + k);
    joint.terms = [this, decoupled, R_int, R_b](const Eigen::VectorXd& s) {
      const int o = K_ + 1;  // offset of the b0 coordinates within the block
      const int P = 2 * o;
      GaussianTerms t;
      t.prior_mean = Eigen::VectorXd::Zero(P);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(P, P);
      if (decoupled) {
        Q(0, 0) = kVaguePrecision;
      } else {
        const double q0 = s(i_iota_ + 0) == 1.0 ? R_int : s(i_tau_);
        Q(0, 0) += q0;
        Q(o, o) += q0;
        Q(0, o) -= q0;
        Q(o, 0) -= q0;
      }
      const double slab_prec = 1.0 / (s(i_sigma_b_) * s(i_sigma_b_));
      for (int k = 1; k <= K_; ++k) {
        if (!decoupled && s(i_iota_ + k) == 1.0) {
          Q(k, k) += R_b;
          Q(o + k, o + k) += R_b;
          Q(k, o + k) -= R_b;
          Q(o + k, k) -= R_b;
        } else {
          Q(k, k) += k == 1 ? kVaguePrecision : slab_prec;
        }
      }
      Q(o + 0, o + 0) += kVaguePrecision;
      Q(o + 1, o + 1) += kVaguePrecision;
      const double slab0 = 1.0 / (s(i_sigma_b0_) * s(i_sigma_b0_));
      for (int k = 2; k <= K_; ++k) Q(o + k, o + k) += slab0;
      t.prior_precision = std::move(Q);
      const double w = 1.0 / (s(i_sigma_) * s(i_sigma_));
      const double w0 = 1.0 / (s(i_sigma0_) * s(i_sigma0_));
      Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(P, P);
      obs.topLeftCorner(o, o) = ZptZp_ * w;
      obs.bottomRightCorner(o, o) = Z0tZ0_ * w0;
      t.obs_precision = std::move(obs);
      Eigen::VectorXd r(P);
      r.head(o) = Zpty_ * w;
      r.tail(o) = Z0ty_ * w0;
      t.obs_weighted = std::move(r);
      return t;
    };
    bs.push_back(std::move(joint));

    bs.push_back(SliceBlock{i_sigma_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ssr = (yp_ - Zp_ * s.segment(i_b_, K_ + 1)).squaredNorm();
                              return scale_logpost(static_cast<double>(yp_.size()), ssr);
                            }});
    bs.push_back(SliceBlock{i_sigma0_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ssr = (y0_ - Z0_ * s.segment(i_b0_, K_ + 1)).squaredNorm();
                              return scale_logpost(static_cast<double>(y0_.size()), ssr);
                            }});
    // sigma_b is informed only by the slab-state shape coefficients of b.
    bs.push_back(SliceBlock{i_sigma_b_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              double ss = 0.0, m = 0.0;
                              for (int k = 2; k <= K_; ++k)
                                if (s(i_iota_ + k) == 0.0) {
                                  ss += s(i_b_ + k) * s(i_b_ + k);
                                  m += 1.0;
                                }
                              return scale_logpost(m, ss);
                            }});
    bs.push_back(SliceBlock{i_sigma_b0_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ss = s.segment(i_b0_ + 2, K_ - 1).squaredNorm();
                              return scale_logpost(static_cast<double>(K_ - 1), ss);
                            }});
    bs.push_back(SliceBlock{i_tau_, tau_lower_, tau_upper_, [this, decoupled](const Eigen::VectorXd& s) {
                              const bool active = !decoupled && s(i_iota_ + 0) == 0.0;
                              const double d = s(i_b_ + 0) - s(i_b0_ + 0);
                              const double d2 = d * d;
                              return std::function<double(double)>([active, d2](double tau) {
                                return active ? 0.5 * std::log(tau) - 0.5 * tau * d2 : 0.0;
                              });
                            }});

    if (spec_.force_indicators == ForceIndicators::none) {
      IndicatorBlock i0;
      i0.index = i_iota_ + 0;
      i0.odds = [this, R_int](const Eigen::VectorXd& s) {
        IndicatorOdds o;
        o.log_spike = gaussian_logdensity(s(i_b_ + 0), s(i_b0_ + 0), R_int);
        o.log_slab = gaussian_logdensity(s(i_b_ + 0), s(i_b0_ + 0), s(i_tau_));
        o.prior_spike = spec_.intercept_hyper.p0;
        return o;
      };
      bs.push_back(std::move(i0));
      for (int k = 1; k <= K_; ++k) {
        IndicatorBlock ib;
        ib.index = i_iota_ + k;
        ib.odds = [this, R_b, k](const Eigen::VectorXd& s) {
          IndicatorOdds o;
          o.log_spike = gaussian_logdensity(s(i_b_ + k), s(i_b0_ + k), R_b);
          o.log_slab = k == 1 ? gaussian_logdensity(s(i_b_ + 1), 0.0, kVaguePrecision)
                              : gaussian_logdensity(s(i_b_ + k), 0.0,
                                                    1.0 / (s(i_sigma_b_) * s(i_sigma_b_)));
          o.prior_spike = s(i_nu_);
          return o;
        };
        bs.push_back(std::move(ib));
      }
    }

    BetaConjugateBlock nu_block;
    nu_block.index = i_nu_;
    nu_block.params = [this](const Eigen::VectorXd& s) {
      double sum = 0.0;
      for (int k = 1; k <= K_; ++k) sum += s(i_iota_ + k);
      return BetaParams{spec_.curve_hyper.a1 + sum, spec_.curve_hyper.a2 + static_cast<double>(K_) - sum};
    };
    bs.push_back(std::move(nu_block));
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    const double ssrp = (yp_ - Zp_ * s.segment(i_b_, K_ + 1)).squaredNorm();
    const double ssr0 = (y0_ - Z0_ * s.segment(i_b0_, K_ + 1)).squaredNorm();
    return gaussian_deviance(static_cast<double>(yp_.size()), ssrp, s(i_sigma_)) +
           gaussian_deviance(static_cast<double>(y0_.size()), ssr0, s(i_sigma0_));
  }

  GmcRegressionSpec spec_;
  OmegaFactor factor_;
  int K_;
  Eigen::VectorXd yp_, y0_;
  Eigen::MatrixXd Zp_, Z0_, ZptZp_, Z0tZ0_;
  Eigen::VectorXd Zpty_, Z0ty_;
  std::vector<std::string> names_;
  int i_b_ = 0, i_b0_ = 0, i_sigma_ = 0, i_sigma0_ = 0, i_sigma_b_ = 0, i_sigma_b0_ = 0;
  int i_iota_ = 0, i_nu_ = 0, i_tau_ = 0;
  double tau_lower_ = 1e-12, tau_upper_ = 2.0;
};

const char* tissue_letter(Tissue t) { return t == Tissue::cancerous ? "c" : "n"; }

class CtpModel final : public PosteriorModel {
 public:
  CtpModel(const RegressionDataset& data, const GmcRegressionSpec& spec)
      : spec_(spec), factor_(omega_factor(spec.partition)), K_(spec.partition.intervals()) {
    data.validate();
    spec_.curve_hyper.validate();
    spec_.intercept_hyper.validate();
    if (!data.has_hierarchy) throw MissingHierarchy("paired-tissue fit needs individual/region/tissue fields");
    y_ = data.y;
    X_ = design_matrix(data.t, spec.partition);
    Z_ = b_space_design(data.t, spec.partition, factor_);
    const int n = data.n();

    for (int i = 0; i < n; ++i) {
      auto& rows = data.tissue[static_cast<std::size_t>(i)] == Tissue::cancerous ? rows_c_ : rows_n_;
      rows.push_back(i);
    }
    if (rows_c_.empty() || rows_n_.empty()) throw MissingHierarchy("need readings from both tissues");

    std::map<std::pair<int, int>, std::vector<int>> grouped;  // (tissue order, individual) -> rows
    for (int i = 0; i < n; ++i) {
      const int tis = data.tissue[static_cast<std::size_t>(i)] == Tissue::cancerous ? 0 : 1;
      grouped[{tis, data.individual[static_cast<std::size_t>(i)]}].push_back(i);
    }
    for (auto& [key, rows] : grouped) {
      Group g;
      g.tissue = key.first == 0 ? Tissue::cancerous : Tissue::noncancerous;
      g.individual = key.second;
      g.rows = rows;
      g.X.resize(static_cast<Eigen::Index>(rows.size()), K_ + 1);
      for (std::size_t r = 0; r < rows.size(); ++r) g.X.row(static_cast<Eigen::Index>(r)) = X_.row(rows[r]);
      g.XtX = g.X.transpose() * g.X;
      groups_.push_back(std::move(g));
    }

    auto cross = [this](const std::vector<int>& rows, Eigen::MatrixXd& ZtZ, Eigen::MatrixXd& Zrows,
                        Eigen::VectorXd& yrows) {
      Zrows.resize(static_cast<Eigen::Index>(rows.size()), K_ + 1);
      yrows.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Zrows.row(static_cast<Eigen::Index>(r)) = Z_.row(rows[r]);
        yrows(static_cast<Eigen::Index>(r)) = y_(rows[r]);
      }
      ZtZ = Zrows.transpose() * Zrows;
    };
    cross(rows_c_, ZctZc_, Zc_, yc_);
    cross(rows_n_, ZntZn_, Zn_, yn_);

    i_bc_ = 0;
    i_bn_ = K_ + 1;
    for (int k = 0; k <= K_; ++k) names_.push_back("bc[" + std::to_string(k) + "]");
    for (int k = 0; k <= K_; ++k) names_.push_back("bn[" + std::to_string(k) + "]");
    int at = 2 * (K_ + 1);
    for (const auto& g : groups_) {
      i_alpha_.push_back(at);
      for (int k = 0; k <= K_; ++k)
        names_.push_back("alpha[" + std::string(tissue_letter(g.tissue)) + "][" +
                         std::to_string(g.individual) + "][" + std::to_string(k) + "]");
      at += K_ + 1;
    }
    i_se_c_ = at++;
    names_.push_back("sigma_e[c]");
    i_se_n_ = at++;
    names_.push_back("sigma_e[n]");
    i_sb_c_ = at++;
    names_.push_back("sigma_b[c]");
    i_sb_n_ = at++;
    names_.push_back("sigma_b[n]");
    for (const auto& g : groups_) {
      i_sa_.push_back(at++);
      names_.push_back("sigma_a[" + std::string(tissue_letter(g.tissue)) + "][" +
                       std::to_string(g.individual) + "]");
    }
    i_iota_ = at;
    for (int k = 0; k <= K_; ++k) names_.push_back("iota[" + std::to_string(k) + "]");
    at += K_ + 1;
    i_nu_ = at++;
    names_.push_back("nu");
    i_tau_ = at++;
    names_.push_back("tau");
    tau_lower_ = std::max(spec_.intercept_hyper.s_l, 1e-12);
    tau_upper_ = spec_.intercept_hyper.s_u;
    build_positions();
  }

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(names_.size());
    const Eigen::VectorXd bch = ridge_coefficients(ZctZc_, Zc_.transpose() * yc_);
    const Eigen::VectorXd bnh = ridge_coefficients(ZntZn_, Zn_.transpose() * yn_);
    for (int k = 0; k <= K_; ++k) s(i_bc_ + k) = bch(k) + 0.3 * rng.normal();
    for (int k = 0; k <= K_; ++k) s(i_bn_ + k) = bnh(k) + 0.3 * rng.normal();
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (int k = 0; k <= K_; ++k) s(i_alpha_[g] + k) = 0.05 * rng.normal();
    const double rc = std::sqrt((yc_ - Zc_ * bch).squaredNorm() / std::max<Eigen::Index>(1, yc_.size()));
    const double rn = std::sqrt((yn_ - Zn_ * bnh).squaredNorm() / std::max<Eigen::Index>(1, yn_.size()));
    s(i_se_c_) = clamp_scale(std::max(rc, 0.05) * std::exp(0.2 * rng.normal()));
    s(i_se_n_) = clamp_scale(std::max(rn, 0.05) * std::exp(0.2 * rng.normal()));
    s(i_sb_c_) = clamp_scale(std::exp(0.5 * rng.normal()));
    s(i_sb_n_) = clamp_scale(std::exp(0.5 * rng.normal()));
    for (std::size_t g = 0; g < groups_.size(); ++g)
      s(i_sa_[g]) = std::clamp(0.3 * std::exp(0.3 * rng.normal()), 0.05, 5.0);
    for (int k = 0; k <= K_; ++k) {
      double v = 0.0;
      if (spec_.force_indicators == ForceIndicators::all_one)
        v = 1.0;
      else if (spec_.force_indicators == ForceIndicators::none)
        v = static_cast<double>(rng.bernoulli(0.5));
      s(i_iota_ + k) = v;
    }
    s(i_nu_) = rng.beta(spec_.curve_hyper.a1, spec_.curve_hyper.a2);
    s(i_tau_) = tau_lower_ + (tau_upper_ - tau_lower_) * (0.05 + 0.9 * rng.uniform());
    return s;
  }

  std::vector<Block> blocks() const override {
    const bool decoupled = spec_.force_indicators == ForceIndicators::all_zero;
    const double R_int = spec_.intercept_hyper.R;
    const double R_b = spec_.curve_hyper.R;
    std::vector<Block> bs;

    // Average curves of both tissues drawn jointly; the ties between the
    // cancerous and noncancerous coefficients enter as cross-precision
    // couples so tied pairs mix along their ridge (see the curve model).
    GaussianBlock joint;
    for (int k = 0; k <= K_; ++k) joint.indices.push_back(i_bc_ + k);
    for (int k = 0; k <= K_; ++k) joint.indices.push_back(i_bn_ + k);
    joint.terms = [this, decoupled, R_int, R_b](const Eigen::VectorXd& s) {
      const int o = K_ + 1;
      const int P = 2 * o;
      GaussianTerms t;
      t.prior_mean = Eigen::VectorXd::Zero(P);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(P, P);
      if (decoupled) {
        Q(0, 0) = kVaguePrecision;
      } else {
        const double q0 = s(i_iota_ + 0) == 1.0 ? R_int : s(i_tau_);
        Q(0, 0) += q0;
        Q(o, o) += q0;
        Q(0, o) -= q0;
        Q(o, 0) -= q0;
      }
      const double slab_prec = 1.0 / (s(i_sb_c_) * s(i_sb_c_));
      for (int k = 1; k <= K_; ++k) {
        if (!decoupled && s(i_iota_ + k) == 1.0) {
          Q(k, k) += R_b;
          Q(o + k, o + k) += R_b;
          Q(k, o + k) -= R_b;
          Q(o + k, k) -= R_b;
        } else {
          Q(k, k) += k == 1 ? kVaguePrecision : slab_prec;
        }
      }
      Q(o + 0, o + 0) += kVaguePrecision;
      Q(o + 1, o + 1) += kVaguePrecision;
      const double slab_n = 1.0 / (s(i_sb_n_) * s(i_sb_n_));
      for (int k = 2; k <= K_; ++k) Q(o + k, o + k) += slab_n;
      t.prior_precision = std::move(Q);
      const double wc = 1.0 / (s(i_se_c_) * s(i_se_c_));
      const double wn = 1.0 / (s(i_se_n_) * s(i_se_n_));
      Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(P, P);
      obs.topLeftCorner(o, o) = ZctZc_ * wc;
      obs.bottomRightCorner(o, o) = ZntZn_ * wn;
      t.obs_precision = std::move(obs);
      Eigen::VectorXd r(P);
      r.head(o) = Zc_.transpose() * (yc_ - deviation_offsets(s, Tissue::cancerous)) * wc;
      r.tail(o) = Zn_.transpose() * (yn_ - deviation_offsets(s, Tissue::noncancerous)) * wn;
      t.obs_weighted = std::move(r);
      return t;
    };
    bs.push_back(std::move(joint));

    for (std::size_t g = 0; g < groups_.size(); ++g) {
      GaussianBlock ab;
      for (int k = 0; k <= K_; ++k) ab.indices.push_back(i_alpha_[g] + k);
      ab.terms = [this, g](const Eigen::VectorXd& s) {
        const Group& grp = groups_[g];
        const bool canc = grp.tissue == Tissue::cancerous;
        const int i_b = canc ? i_bc_ : i_bn_;
        const double se = canc ? s(i_se_c_) : s(i_se_n_);
        const double w = 1.0 / (se * se);
        GaussianTerms t;
        t.prior_mean = Eigen::VectorXd::Zero(K_ + 1);
        const double sa = s(i_sa_[g]);
        t.prior_precision = Eigen::MatrixXd::Identity(K_ + 1, K_ + 1) / (sa * sa);
        Eigen::VectorXd resid(grp.rows.size());
        const Eigen::VectorXd b = s.segment(i_b, K_ + 1);
        for (std::size_t r = 0; r < grp.rows.size(); ++r) {
          const int row = grp.rows[r];
          resid(static_cast<Eigen::Index>(r)) = y_(row) - Z_.row(row).dot(b);
        }
        t.obs_precision = grp.XtX * w;
        t.obs_weighted = grp.X.transpose() * resid * w;
        return t;
      };
      bs.push_back(std::move(ab));
    }

    bs.push_back(SliceBlock{i_se_c_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              return scale_logpost(static_cast<double>(rows_c_.size()),
                                                   tissue_ssr(s, Tissue::cancerous));
                            }});
    bs.push_back(SliceBlock{i_se_n_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              return scale_logpost(static_cast<double>(rows_n_.size()),
                                                   tissue_ssr(s, Tissue::noncancerous));
                            }});
    bs.push_back(SliceBlock{i_sb_c_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              double ss = 0.0, m = 0.0;
                              for (int k = 2; k <= K_; ++k)
                                if (s(i_iota_ + k) == 0.0) {
                                  ss += s(i_bc_ + k) * s(i_bc_ + k);
                                  m += 1.0;
                                }
                              return scale_logpost(m, ss);
                            }});
    bs.push_back(SliceBlock{i_sb_n_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              const double ss = s.segment(i_bn_ + 2, K_ - 1).squaredNorm();
                              return scale_logpost(static_cast<double>(K_ - 1), ss);
                            }});
    for (std::size_t g = 0; g < groups_.size(); ++g)
      bs.push_back(SliceBlock{i_sa_[g], kSigmaLower, kSigmaUpper, [this, g](const Eigen::VectorXd& s) {
                                const double ss = s.segment(i_alpha_[g], K_ + 1).squaredNorm();
                                return scale_logpost(static_cast<double>(K_ + 1), ss);
                              }});
    bs.push_back(SliceBlock{i_tau_, tau_lower_, tau_upper_, [this, decoupled](const Eigen::VectorXd& s) {
                              const bool active = !decoupled && s(i_iota_ + 0) == 0.0;
                              const double d = s(i_bc_ + 0) - s(i_bn_ + 0);
                              const double d2 = d * d;
                              return std::function<double(double)>([active, d2](double tau) {
                                return active ? 0.5 * std::log(tau) - 0.5 * tau * d2 : 0.0;
                              });
                            }});

    if (spec_.force_indicators == ForceIndicators::none) {
      IndicatorBlock i0;
      i0.index = i_iota_ + 0;
      i0.odds = [this, R_int](const Eigen::VectorXd& s) {
        IndicatorOdds o;
        o.log_spike = gaussian_logdensity(s(i_bc_ + 0), s(i_bn_ + 0), R_int);
        o.log_slab = gaussian_logdensity(s(i_bc_ + 0), s(i_bn_ + 0), s(i_tau_));
        o.prior_spike = spec_.intercept_hyper.p0;
        return o;
      };
      bs.push_back(std::move(i0));
      for (int k = 1; k <= K_; ++k) {
        IndicatorBlock ib;
        ib.index = i_iota_ + k;
        ib.odds = [this, R_b, k](const Eigen::VectorXd& s) {
          IndicatorOdds o;
          o.log_spike = gaussian_logdensity(s(i_bc_ + k), s(i_bn_ + k), R_b);
          o.log_slab = k == 1 ? gaussian_logdensity(s(i_bc_ + 1), 0.0, kVaguePrecision)
                              : gaussian_logdensity(s(i_bc_ + k), 0.0, 1.0 / (s(i_sb_c_) * s(i_sb_c_)));
          o.prior_spike = s(i_nu_);
          return o;
        };
        bs.push_back(std::move(ib));
      }
    }

    BetaConjugateBlock nu_block;
    nu_block.index = i_nu_;
    nu_block.params = [this](const Eigen::VectorXd& s) {
      double sum = 0.0;
      for (int k = 1; k <= K_; ++k) sum += s(i_iota_ + k);
      return BetaParams{spec_.curve_hyper.a1 + sum, spec_.curve_hyper.a2 + static_cast<double>(K_) - sum};
    };
    bs.push_back(std::move(nu_block));
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    return gaussian_deviance(static_cast<double>(rows_c_.size()), tissue_ssr(s, Tissue::cancerous), s(i_se_c_)) +
           gaussian_deviance(static_cast<double>(rows_n_.size()), tissue_ssr(s, Tissue::noncancerous),
                             s(i_se_n_));
  }

  struct Group {
    Tissue tissue = Tissue::cancerous;
    int individual = 0;
    std::vector<int> rows;
    Eigen::MatrixXd X, XtX;
  };

  // Per-reading deviation-curve offsets X_row' alpha_{group(row)} for one tissue,
  // ordered as that tissue's rows.
  Eigen::VectorXd deviation_offsets(const Eigen::VectorXd& s, Tissue tis) const {
    const auto& rows = tis == Tissue::cancerous ? rows_c_ : rows_n_;
    const auto& pos = tis == Tissue::cancerous ? pos_c_ : pos_n_;
    Eigen::VectorXd off = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const Group& grp = groups_[g];
      if (grp.tissue != tis) continue;
      const Eigen::VectorXd vals = grp.X * s.segment(i_alpha_[g], K_ + 1);
      for (std::size_t r = 0; r < grp.rows.size(); ++r)
        off(pos.at(grp.rows[r])) = vals(static_cast<Eigen::Index>(r));
    }
    return off;
  }

  double tissue_ssr(const Eigen::VectorXd& s, Tissue tis) const {
    const auto& Zt = tis == Tissue::cancerous ? Zc_ : Zn_;
    const auto& yt = tis == Tissue::cancerous ? yc_ : yn_;
    const int i_b = tis == Tissue::cancerous ? i_bc_ : i_bn_;
    const Eigen::VectorXd fitted = Zt * s.segment(i_b, K_ + 1) + deviation_offsets(s, tis);
    return (yt - fitted).squaredNorm();
  }

  void build_positions() {
    for (std::size_t r = 0; r < rows_c_.size(); ++r) pos_c_[rows_c_[r]] = static_cast<Eigen::Index>(r);
    for (std::size_t r = 0; r < rows_n_.size(); ++r) pos_n_[rows_n_[r]] = static_cast<Eigen::Index>(r);
  }

  GmcRegressionSpec spec_;
  OmegaFactor factor_;
  int K_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd X_, Z_;
  std::vector<int> rows_c_, rows_n_;
  std::map<int, Eigen::Index> pos_c_, pos_n_;
  Eigen::MatrixXd Zc_, Zn_, ZctZc_, ZntZn_;
  Eigen::VectorXd yc_, yn_;
  std::vector<Group> groups_;
  std::vector<std::string> names_;
  std::vector<int> i_alpha_, i_sa_;
  int i_bc_ = 0, i_bn_ = 0, i_se_c_ = 0, i_se_n_ = 0, i_sb_c_ = 0, i_sb_n_ = 0;
  int i_iota_ = 0, i_nu_ = 0, i_tau_ = 0;
  double tau_lower_ = 1e-12, tau_upper_ = 0.5;
};

std::string selector_prefix(const CurveSelector& sel) {
  switch (sel.kind) {
    case CurveSelector::Kind::primary:
      return "b";
    case CurveSelector::Kind::supplemental:
      return "b0";
    case CurveSelector::Kind::cancerous:
      return "bc";
    case CurveSelector::Kind::noncancerous:
      return "bn";
    case CurveSelector::Kind::deviation:
      return "alpha[" + std::string(tissue_letter(sel.tissue)) + "][" + std::to_string(sel.individual) + "]";
  }
  throw UnknownCurve("unrecognized curve selector");
}

// Pooled coefficient draws (total x K+1) for the selected curve.
Eigen::MatrixXd coefficient_draws(const ChainSet& cs, const std::string& prefix, int K) {
  std::vector<int> cols;
  for (int k = 0; k <= K; ++k) {
    const int j = cs.index_of(prefix + "[" + std::to_string(k) + "]");
    if (j < 0) throw UnknownCurve("fit does not contain curve coefficients " + prefix + "[0.." +
                                  std::to_string(K) + "]");
    cols.push_back(j);
  }
  const Eigen::Index total = static_cast<Eigen::Index>(cs.n_chains()) * cs.n_stored();
  Eigen::MatrixXd B(total, K + 1);
  Eigen::Index at = 0;
  for (const auto& m : cs.draws) {
    for (int k = 0; k <= K; ++k) B.col(k).segment(at, m.rows()) = m.col(cols[static_cast<std::size_t>(k)]);
    at += m.rows();
  }
  return B;
}

// Type-7 quantile via nth_element; values is scratch and gets reordered.
double quantile_nth(std::vector<double>& values, double p) {
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double vlo = values[lo];
  if (lo + 1 >= n || frac == 0.0) return vlo;
  const double vnext = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return vlo + frac * (vnext - vlo);
}

CurveSummary summarize_curve_draws(const Eigen::MatrixXd& curves, const Eigen::VectorXd& grid, double level) {
  CurveSummary out;
  out.grid = grid;
  out.level = level;
  const double pl = 0.5 * (1.0 - level);
  const double pu = 1.0 - pl;
  const Eigen::Index G = curves.cols();
  out.mean.resize(G);
  out.lower.resize(G);
  out.upper.resize(G);
  std::vector<double> scratch;
  for (Eigen::Index j = 0; j < G; ++j) {
    out.mean(j) = curves.col(j).mean();
    scratch.assign(curves.col(j).data(), curves.col(j).data() + curves.rows());
    out.lower(j) = quantile_nth(scratch, pl);
    scratch.assign(curves.col(j).data(), curves.col(j).data() + curves.rows());
    out.upper(j) = quantile_nth(scratch, pu);
  }
  return out;
}

}  // namespace

void RegressionDataset::validate() const {
  if (y.size() != t.size()) throw DimensionMismatch("y and t lengths differ");
  if (y.size() == 0) throw DimensionMismatch("empty dataset");
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t(i) >= 0.0 && t(i) <= 1.0)) throw RangeError("t outside [0,1]");
    if (!std::isfinite(y(i))) throw RangeError("nonfinite response");
  }
  const std::size_t n = static_cast<std::size_t>(y.size());
  if (has_hierarchy) {
    if (individual.size() != n || region.size() != n || tissue.size() != n)
      throw DimensionMismatch("hierarchical fields must cover every reading");
  } else if (!individual.empty() || !region.empty() || !tissue.empty()) {
    throw DimensionMismatch("hierarchical fields present together or absent together");
  }
}

ChainSet fit_regression_conventional(const RegressionDataset& data, const Partition& p,
                                     const SamplerConfig& config) {
  ConventionalRegressionModel model(data, p);
  ChainSet cs = run_chains(model, config);
  if (data.n() < p.intervals() + 2)
    cs.warnings.push_back("fewer observations than coefficients; fit is prior-dominated");
  return cs;
}

ChainSet fit_regression_gmc(const RegressionDataset& primary, const RegressionDataset& supplemental,
                            const GmcRegressionSpec& spec, const SamplerConfig& config) {
  GmcRegressionModel model(primary, supplemental, spec);
  return run_chains(model, config);
}

ChainSet fit_ctp_gmc(const RegressionDataset& data, const GmcRegressionSpec& spec, const SamplerConfig& config) {
  CtpModel model(data, spec);
  ChainSet cs = run_chains(model, config);

  // Identifiability guard: deviation curves within a tissue should average out.
  const Eigen::VectorXd mean = cs.posterior_mean();
  const int K = spec.partition.intervals();
  Eigen::VectorXd grid(21);
  for (int i = 0; i < 21; ++i) grid(i) = static_cast<double>(i) / 20.0;
  const Eigen::MatrixXd X = design_matrix(grid, spec.partition);
  const OmegaFactor f = omega_factor(spec.partition);
  const Eigen::MatrixXd Z = b_space_design(grid, spec.partition, f);
  for (Tissue tis : {Tissue::cancerous, Tissue::noncancerous}) {
    Eigen::VectorXd sum_dev = Eigen::VectorXd::Zero(21);
    bool any = false;
    for (int j = 0; j < cs.n_params(); ++j) {
      const std::string& nm = cs.names[static_cast<std::size_t>(j)];
      const std::string pre = std::string("alpha[") + tissue_letter(tis) + "][";
      if (nm.rfind(pre, 0) != 0 || nm.substr(nm.size() - 3) != "[0]") continue;
      // j is the intercept coefficient of one deviation curve; the remaining K follow it
      Eigen::VectorXd alpha(K + 1);
      for (int k = 0; k <= K; ++k) alpha(k) = mean(j + k);
      sum_dev += X * alpha;
      any = true;
    }
    if (!any) continue;
    const int i_b = cs.index_of(tis == Tissue::cancerous ? "bc[0]" : "bn[0]");
    Eigen::VectorXd b(K + 1);
    for (int k = 0; k <= K; ++k) b(k) = mean(i_b + k);
    const Eigen::VectorXd curve = Z * b;
    const double range = curve.maxCoeff() - curve.minCoeff();
    const double worst = sum_dev.cwiseAbs().maxCoeff();
    if (range > 0.0 && worst > 0.25 * range)
      cs.warnings.push_back(std::string("summed deviation curves for tissue ") + tissue_letter(tis) +
                            " reach " + std::to_string(worst) + ", above 25% of the average-curve range " +
                            std::to_string(range));
  }
  return cs;
}

CurveSummary predict_curve(const ChainSet& cs, const Partition& p, const CurveSelector& sel,
                           const Eigen::VectorXd& grid, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level outside (0,1)");
  validate_partition(p);
  const int K = p.intervals();
  const Eigen::MatrixXd B = coefficient_draws(cs, selector_prefix(sel), K);
  Eigen::MatrixXd L;  // grid loadings against the stored coefficients
  if (sel.kind == CurveSelector::Kind::deviation) {
    L = design_matrix(grid, p);
  } else {
    L = b_space_design(grid, p, omega_factor(p));
  }
  return summarize_curve_draws(B * L.transpose(), grid, level);
}

CurveSummary predict_derivative(const ChainSet& cs, const Partition& p, const CurveSelector& sel,
                                const Eigen::VectorXd& grid, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level outside (0,1)");
  validate_partition(p);
  const int K = p.intervals();
  const Eigen::MatrixXd B = coefficient_draws(cs, selector_prefix(sel), K);
  Eigen::MatrixXd D(grid.size(), K + 1);
  for (Eigen::Index i = 0; i < grid.size(); ++i) D.row(i) = derivative_row(grid(i), p).transpose();
  if (sel.kind != CurveSelector::Kind::deviation) {
    // derivative loadings against b-space coefficients
    const OmegaFactor f = omega_factor(p);
    Eigen::MatrixXd Db(D.rows(), D.cols());
    Db.leftCols(2) = D.leftCols(2);
    Db.rightCols(K - 1) = D.rightCols(K - 1) * f.inv_sqrt;
    D = Db;
  }
  return summarize_curve_draws(B * D.transpose(), grid, level);
}

}  // namespace gmc

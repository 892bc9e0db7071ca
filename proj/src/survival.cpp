#include "gmcborrow/survival.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "gmcborrow/errors.hpp"

namespace gmc {

namespace {

// Event counts and exposure per (interval, covariate pattern).
struct PweSuffStats {
  std::vector<std::array<int, 2>> patterns;  // distinct (zF, zI), sorted
  Eigen::MatrixXd events;                    // K x G
  Eigen::MatrixXd exposure;                  // K x G
};

double interval_overlap(double t, double lo, double hi) { return std::max(0.0, std::min(t, hi) - lo); }

PweSuffStats build_stats(const SurvivalDataset& data, const Partition& p) {
  data.validate();
  validate_partition(p);
  const int K = p.intervals();
  std::map<std::array<int, 2>, int> index;
  PweSuffStats s;
  for (int i = 0; i < data.n(); ++i) {
    const std::array<int, 2> z{data.has_covariates ? data.zF[static_cast<std::size_t>(i)] : 0,
                               data.has_covariates ? data.zI[static_cast<std::size_t>(i)] : 0};
    index.emplace(z, 0);
  }
  int g = 0;
  for (auto& [z, idx] : index) {
    idx = g++;
    s.patterns.push_back(z);
  }
  s.events = Eigen::MatrixXd::Zero(K, g);
  s.exposure = Eigen::MatrixXd::Zero(K, g);
  for (int i = 0; i < data.n(); ++i) {
    const std::array<int, 2> z{data.has_covariates ? data.zF[static_cast<std::size_t>(i)] : 0,
                               data.has_covariates ? data.zI[static_cast<std::size_t>(i)] : 0};
    const int col = index[z];
    const double t = data.time(i);
    for (int k = 0; k < K; ++k)
      s.exposure(k, col) += interval_overlap(t, p.knots(k), p.knots(k + 1));
    if (data.event[static_cast<std::size_t>(i)] == 1) {
      // intervals are right-closed: t in (knot_{k-1}, knot_k]
      int k = 0;
      while (k + 1 < K && t > p.knots(k + 1)) ++k;
      s.events(k, col) += 1.0;
    }
  }
  return s;
}

double stats_loglik(const PweSuffStats& s, const Eigen::VectorXd& gamma, double rhoF, double rhoI) {
  double ll = 0.0;
  for (std::size_t g = 0; g < s.patterns.size(); ++g) {
    const double lp = rhoF * s.patterns[g][0] + rhoI * s.patterns[g][1];
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
      const double d = s.events(k, static_cast<Eigen::Index>(g));
      const double e = s.exposure(k, static_cast<Eigen::Index>(g));
      if (d > 0.0) ll += d * (gamma(k) + lp);
      ll -= std::exp(gamma(k) + lp) * e;
    }
  }
  return ll;
}

double crude_log_hazard(const SurvivalDataset& d) {
  double events = 0.0, exposure = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    events += d.event[static_cast<std::size_t>(i)];
    exposure += d.time(i);
  }
  return std::log(std::max(events, 0.5) / std::max(exposure, 1e-12));
}

class PweConventionalModel final : public PosteriorModel {
 public:
  PweConventionalModel(const SurvivalDataset& data, const Partition& p)
      : stats_(build_stats(data, p)), K_(p.intervals()), has_cov_(data.has_covariates) {
    if (data.n_events() == 0) throw NoEvents("no events in dataset");
    crude_ = crude_log_hazard(data);
    for (int k = 1; k <= K_; ++k) names_.push_back("gamma[" + std::to_string(k) + "]");
    i_rhoF_ = -1;
    i_rhoI_ = -1;
    if (has_cov_) {
      i_rhoF_ = K_;
      names_.push_back("rho_F");
      i_rhoI_ = K_ + 1;
      names_.push_back("rho_I");
    }
    i_sigma_ = static_cast<int>(names_.size());
    names_.push_back("sigma_gamma");
  }

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s(names_.size());
    for (int k = 0; k < K_; ++k) s(k) = crude_ + 0.3 * rng.normal();
    if (has_cov_) {
      s(i_rhoF_) = 0.2 * rng.normal();
      s(i_rhoI_) = 0.2 * rng.normal();
    }
    s(i_sigma_) = std::clamp(std::exp(0.5 * rng.normal()), 0.05, 20.0);
    return s;
  }

  std::vector<Block> blocks() const override {
    std::vector<Block> bs;
    bs.push_back(SliceBlock{i_sigma_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              double ss = 0.0;
                              for (int k = 1; k < K_; ++k) {
                                const double d = s(k) - s(k - 1);
                                ss += d * d;
                              }
                              return scale_logpost(static_cast<double>(K_ - 1), ss);
                            }});
    for (int k = 0; k < K_; ++k) bs.push_back(gamma_block(k));
    if (has_cov_) {
      bs.push_back(rho_block(i_rhoF_, 0, "rho_F"));
      bs.push_back(rho_block(i_rhoI_, 1, "rho_I"));
    }
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    const double rf = has_cov_ ? s(i_rhoF_) : 0.0;
    const double ri = has_cov_ ? s(i_rhoI_) : 0.0;
    return -2.0 * stats_loglik(stats_, s.head(K_), rf, ri);
  }

 private:
  static std::function<double(double)> scale_logpost(double m, double ss) {
    return [m, ss](double v) { return -m * std::log(v) - 0.5 * ss / (v * v); };
  }

  MetropolisBlock gamma_block(int k) const {
    MetropolisBlock mb;
    mb.index = k;
    mb.label = "gamma[" + std::to_string(k + 1) + "]";
    mb.initial_step = 0.3;
    mb.make_logpost = [this, k](const Eigen::VectorXd& s) {
      double dsum = 0.0, esum = 0.0;
      for (std::size_t g = 0; g < stats_.patterns.size(); ++g) {
        const double lp = (has_cov_ ? s(i_rhoF_) : 0.0) * stats_.patterns[g][0] +
                          (has_cov_ ? s(i_rhoI_) : 0.0) * stats_.patterns[g][1];
        dsum += stats_.events(k, static_cast<Eigen::Index>(g));
        esum += std::exp(lp) * stats_.exposure(k, static_cast<Eigen::Index>(g));
      }
      const double sg = s(i_sigma_);
      const double prec = 1.0 / (sg * sg);
      const double prev = k > 0 ? s(k - 1) : 0.0;
      const bool has_next = k + 1 < K_;
      const double next = has_next ? s(k + 1) : 0.0;
      return std::function<double(double)>([dsum, esum, prec, prev, next, has_next, k](double g) {
        double lp = dsum * g - esum * std::exp(g);
        lp += k == 0 ? -0.5 * kVaguePrecision * g * g : -0.5 * prec * (g - prev) * (g - prev);
        if (has_next) lp += -0.5 * prec * (next - g) * (next - g);
        return lp;
      });
    };
    return mb;
  }

  MetropolisBlock rho_block(int index, int which, const std::string& label) const {
    MetropolisBlock mb;
    mb.index = index;
    mb.label = label;
    mb.initial_step = 0.2;
    mb.make_logpost = [this, index, which](const Eigen::VectorXd& s) {
      // collapse over patterns that carry this indicator; the other one is held fixed
      double dsum = 0.0;
      std::vector<double> expo(static_cast<std::size_t>(K_), 0.0);
      double other = 0.0;
      for (std::size_t g = 0; g < stats_.patterns.size(); ++g) {
        if (stats_.patterns[g][static_cast<std::size_t>(which)] != 1) continue;
        const int other_ind = stats_.patterns[g][static_cast<std::size_t>(1 - which)];
        other = (which == 0 ? s(i_rhoI_) : s(i_rhoF_)) * other_ind;
        for (int k = 0; k < K_; ++k) {
          dsum += stats_.events(k, static_cast<Eigen::Index>(g));
          expo[static_cast<std::size_t>(k)] += std::exp(other) * stats_.exposure(k, static_cast<Eigen::Index>(g));
        }
      }
      double esum = 0.0;
      for (int k = 0; k < K_; ++k) esum += std::exp(s(k)) * expo[static_cast<std::size_t>(k)];
      (void)index;
      return std::function<double(double)>([dsum, esum](double r) {
        return dsum * r - esum * std::exp(r) - 0.5 * kVaguePrecision * r * r;
      });
    };
    return mb;
  }

  PweSuffStats stats_;
  int K_;
  bool has_cov_;
  double crude_ = 0.0;
  std::vector<std::string> names_;
  int i_rhoF_ = -1, i_rhoI_ = -1, i_sigma_ = 0;
};

class PweGmcModel final : public PosteriorModel {
 public:
  PweGmcModel(const SurvivalDataset& primary, const SurvivalDataset& supplemental, const GmcHyper& hyper,
              const Partition& p, ForceIndicators force)
      : stats_p_(build_stats(primary, p)),
        stats_0_(build_stats(supplemental, p)),
        hyper_(hyper),
        K_(p.intervals()),
        has_cov_(primary.has_covariates),
        force_(force) {
    hyper_.validate();
    if (primary.n_events() == 0) throw NoEvents("no events in primary dataset");
    if (supplemental.n_events() == 0) throw NoEvents("no events in supplemental dataset");
    if (supplemental.has_covariates) {
      for (std::size_t i = 0; i < supplemental.zF.size(); ++i)
        if (supplemental.zF[i] != 0 || supplemental.zI[i] != 0)
          throw UnknownCovariateSetting("supplemental subjects must carry no treatment indicators");
    }
    crude_ = 0.5 * (crude_log_hazard(primary) + crude_log_hazard(supplemental));
    for (int k = 1; k <= K_; ++k) names_.push_back("gamma[" + std::to_string(k) + "]");
    for (int k = 1; k <= K_; ++k) names_.push_back("gamma0[" + std::to_string(k) + "]");
    i_g_ = 0;
    i_g0_ = K_;
    int at = 2 * K_;
    i_rhoF_ = -1;
    i_rhoI_ = -1;
    if (has_cov_) {
      i_rhoF_ = at++;
      names_.push_back("rho_F");
      i_rhoI_ = at++;
      names_.push_back("rho_I");
    }
    i_sigma_ = at++;
    names_.push_back("sigma_gamma");
    i_sigma0_ = at++;
    names_.push_back("sigma_gamma0");
    i_iota_ = at;
    for (int k = 1; k <= K_; ++k) names_.push_back("iota[" + std::to_string(k) + "]");
    at += K_;
    i_nu_ = at++;
    names_.push_back("nu_gamma");
  }

  const std::vector<std::string>& parameter_names() const override { return names_; }

  Eigen::VectorXd initial_state(int, Rng& rng) const override {
    Eigen::VectorXd s(names_.size());
    // Both curves start at the pooled crude rate with shared per-interval noise,
    // so initially pinned coordinates are consistent with either mode.
    for (int k = 0; k < K_; ++k) {
      const double base = crude_ + 0.2 * rng.normal();
      s(i_g_ + k) = base;
      s(i_g0_ + k) = base;
    }
    if (has_cov_) {
      s(i_rhoF_) = 0.2 * rng.normal();
      s(i_rhoI_) = 0.2 * rng.normal();
    }
    s(i_sigma_) = std::clamp(std::exp(0.5 * rng.normal()), 0.05, 20.0);
    s(i_sigma0_) = std::clamp(std::exp(0.5 * rng.normal()), 0.05, 20.0);
    for (int k = 0; k < K_; ++k) {
      double v = 0.0;
      if (force_ == ForceIndicators::all_one)
        v = 1.0;
      else if (force_ == ForceIndicators::none)
        v = static_cast<double>(rng.bernoulli(0.5));
      s(i_iota_ + k) = v;
    }
    s(i_nu_) = rng.beta(hyper_.a1, hyper_.a2);
    return s;
  }

  std::vector<Block> blocks() const override {
    std::vector<Block> bs;
    // sigma_gamma sees only the slab-state increments of the primary walk.
    bs.push_back(SliceBlock{i_sigma_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              double ss = 0.0, m = 0.0;
                              for (int k = 1; k < K_; ++k)
                                if (s(i_iota_ + k) == 0.0) {
                                  const double d = s(i_g_ + k) - s(i_g_ + k - 1);
                                  ss += d * d;
                                  m += 1.0;
                                }
                              return scale_logpost(m, ss);
                            }});
    bs.push_back(SliceBlock{i_sigma0_, kSigmaLower, kSigmaUpper, [this](const Eigen::VectorXd& s) {
                              double ss = 0.0;
                              for (int k = 1; k < K_; ++k) {
                                const double d = s(i_g0_ + k) - s(i_g0_ + k - 1);
                                ss += d * d;
                              }
                              return scale_logpost(static_cast<double>(K_ - 1), ss);
                            }});
    if (force_ == ForceIndicators::none) {
      for (int k = 0; k < K_; ++k) {
        IndicatorBlock ib;
        ib.index = i_iota_ + k;
        ib.odds = [this, k](const Eigen::VectorXd& s) {
          IndicatorOdds o;
          o.log_spike = gaussian_logdensity(s(i_g_ + k), s(i_g0_ + k), hyper_.R);
          const double sg = s(i_sigma_);
          o.log_slab = k == 0 ? gaussian_logdensity(s(i_g_ + 0), 0.0, kVaguePrecision)
                              : gaussian_logdensity(s(i_g_ + k), s(i_g_ + k - 1), 1.0 / (sg * sg));
          o.prior_spike = s(i_nu_);
          return o;
        };
        bs.push_back(std::move(ib));
      }
      BetaConjugateBlock nb;
      nb.index = i_nu_;
      nb.params = [this](const Eigen::VectorXd& s) {
        double sum = 0.0;
        for (int k = 0; k < K_; ++k) sum += s(i_iota_ + k);
        return BetaParams{hyper_.a1 + sum, hyper_.a2 + static_cast<double>(K_) - sum};
      };
      bs.push_back(std::move(nb));
    }
    for (int k = 0; k < K_; ++k) bs.push_back(gamma_block(k));
    for (int k = 0; k < K_; ++k) bs.push_back(gamma0_block(k));
    // Paired shifts keep each tied pair mixing: a pinned pair has a ridge
    // along (1,1) that single-site moves cross in steps of order 1/sqrt(R).
    for (int k = 0; k < K_; ++k) bs.push_back(pair_block(k));
    // Flip-with-jump moves let a pinned coordinate leave the spike even when
    // the walk scale is momentarily unidentified; a fully pinned chain would
    // otherwise be an absorbing state.
    if (force_ == ForceIndicators::none)
      for (int k = 0; k < K_; ++k) bs.push_back(flip_block(k));
    if (has_cov_) {
      bs.push_back(rho_block(i_rhoF_, 0, "rho_F"));
      bs.push_back(rho_block(i_rhoI_, 1, "rho_I"));
    }
    return bs;
  }

  double deviance(const Eigen::VectorXd& s) const override {
    const double rf = has_cov_ ? s(i_rhoF_) : 0.0;
    const double ri = has_cov_ ? s(i_rhoI_) : 0.0;
    return -2.0 * (stats_loglik(stats_p_, s.segment(i_g_, K_), rf, ri) +
                   stats_loglik(stats_0_, s.segment(i_g0_, K_), 0.0, 0.0));
  }

 private:
  static std::function<double(double)> scale_logpost(double m, double ss) {
    return [m, ss](double v) { return -m * std::log(v) - 0.5 * ss / (v * v); };
  }

  MetropolisBlock gamma_block(int k) const {
    MetropolisBlock mb;
    mb.index = i_g_ + k;
    mb.label = "gamma[" + std::to_string(k + 1) + "]";
    mb.initial_step = 0.3;
    mb.make_logpost = [this, k](const Eigen::VectorXd& s) {
      double dsum = 0.0, esum = 0.0;
      for (std::size_t g = 0; g < stats_p_.patterns.size(); ++g) {
        const double lp = (has_cov_ ? s(i_rhoF_) : 0.0) * stats_p_.patterns[g][0] +
                          (has_cov_ ? s(i_rhoI_) : 0.0) * stats_p_.patterns[g][1];
        dsum += stats_p_.events(k, static_cast<Eigen::Index>(g));
        esum += std::exp(lp) * stats_p_.exposure(k, static_cast<Eigen::Index>(g));
      }
      const double prec_rw = 1.0 / (s(i_sigma_) * s(i_sigma_));
      const bool own_spike = s(i_iota_ + k) == 1.0;
      const double center = own_spike ? s(i_g0_ + k) : (k > 0 ? s(i_g_ + k - 1) : 0.0);
      const double own_prec = own_spike ? hyper_.R : (k > 0 ? prec_rw : kVaguePrecision);
      const bool next_slab = k + 1 < K_ && s(i_iota_ + k + 1) == 0.0;
      const double next = next_slab ? s(i_g_ + k + 1) : 0.0;
      return std::function<double(double)>([dsum, esum, center, own_prec, next, next_slab, prec_rw](double g) {
        double lp = dsum * g - esum * std::exp(g);
        lp += -0.5 * own_prec * (g - center) * (g - center);
        if (next_slab) lp += -0.5 * prec_rw * (next - g) * (next - g);
        return lp;
      });
    };
    return mb;
  }

  MetropolisBlock gamma0_block(int k) const {
    MetropolisBlock mb;
    mb.index = i_g0_ + k;
    mb.label = "gamma0[" + std::to_string(k + 1) + "]";
    mb.initial_step = 0.3;
    mb.make_logpost = [this, k](const Eigen::VectorXd& s) {
      double dsum = 0.0, esum = 0.0;
      for (std::size_t g = 0; g < stats_0_.patterns.size(); ++g) {
        dsum += stats_0_.events(k, static_cast<Eigen::Index>(g));
        esum += stats_0_.exposure(k, static_cast<Eigen::Index>(g));
      }
      const double prec_rw0 = 1.0 / (s(i_sigma0_) * s(i_sigma0_));
      const double prev = k > 0 ? s(i_g0_ + k - 1) : 0.0;
      const double own_prec = k > 0 ? prec_rw0 : kVaguePrecision;
      const bool has_next = k + 1 < K_;
      const double next = has_next ? s(i_g0_ + k + 1) : 0.0;
      const bool tied = s(i_iota_ + k) == 1.0;
      const double tied_value = s(i_g_ + k);
      const double R = hyper_.R;
      return std::function<double(double)>(
          [dsum, esum, prev, own_prec, next, has_next, prec_rw0, tied, tied_value, R](double g) {
            double lp = dsum * g - esum * std::exp(g);
            lp += -0.5 * own_prec * (g - prev) * (g - prev);
            if (has_next) lp += -0.5 * prec_rw0 * (next - g) * (next - g);
            if (tied) lp += -0.5 * R * (tied_value - g) * (tied_value - g);
            return lp;
          });
    };
    return mb;
  }

  PairShiftBlock pair_block(int k) const {
    PairShiftBlock pb;
    pb.index_a = i_g_ + k;
    pb.index_b = i_g0_ + k;
    pb.label = "gamma_pair[" + std::to_string(k + 1) + "]";
    pb.initial_step = 0.3;
    pb.make_logpost = [this, k](const Eigen::VectorXd& s) {
      double dp = 0.0, ep = 0.0;
      for (std::size_t g = 0; g < stats_p_.patterns.size(); ++g) {
        const double lp = (has_cov_ ? s(i_rhoF_) : 0.0) * stats_p_.patterns[g][0] +
                          (has_cov_ ? s(i_rhoI_) : 0.0) * stats_p_.patterns[g][1];
        dp += stats_p_.events(k, static_cast<Eigen::Index>(g));
        ep += std::exp(lp) * stats_p_.exposure(k, static_cast<Eigen::Index>(g));
      }
      double d0 = 0.0, e0 = 0.0;
      for (std::size_t g = 0; g < stats_0_.patterns.size(); ++g) {
        d0 += stats_0_.events(k, static_cast<Eigen::Index>(g));
        e0 += stats_0_.exposure(k, static_cast<Eigen::Index>(g));
      }
      const double ga = s(i_g_ + k);
      const double gb = s(i_g0_ + k);
      const double prec_rw = 1.0 / (s(i_sigma_) * s(i_sigma_));
      const double prec_rw0 = 1.0 / (s(i_sigma0_) * s(i_sigma0_));
      // The pinning term depends only on the difference, which a shared shift
      // preserves, so it drops out of the ratio. Everything else moves.
      const bool own_slab = s(i_iota_ + k) == 0.0;
      const double own_center = own_slab && k > 0 ? s(i_g_ + k - 1) : 0.0;
      const double own_prec = own_slab ? (k > 0 ? prec_rw : kVaguePrecision) : 0.0;
      const bool next_slab = k + 1 < K_ && s(i_iota_ + k + 1) == 0.0;
      const double next_g = next_slab ? s(i_g_ + k + 1) : 0.0;
      const double prev0 = k > 0 ? s(i_g0_ + k - 1) : 0.0;
      const double own_prec0 = k > 0 ? prec_rw0 : kVaguePrecision;
      const bool has_next0 = k + 1 < K_;
      const double next0 = has_next0 ? s(i_g0_ + k + 1) : 0.0;
      return std::function<double(double)>([dp, ep, d0, e0, ga, gb, prec_rw, prec_rw0, own_center, own_prec,
                                            next_slab, next_g, prev0, own_prec0, has_next0, next0](double eps) {
        const double g = ga + eps;
        const double g0 = gb + eps;
        double lp = dp * g - ep * std::exp(g) + d0 * g0 - e0 * std::exp(g0);
        lp += -0.5 * own_prec * (g - own_center) * (g - own_center);
        if (next_slab) lp += -0.5 * prec_rw * (next_g - g) * (next_g - g);
        lp += -0.5 * own_prec0 * (g0 - prev0) * (g0 - prev0);
        if (has_next0) lp += -0.5 * prec_rw0 * (next0 - g0) * (next0 - g0);
        return lp;
      });
    };
    return pb;
  }

  FlipJumpBlock flip_block(int k) const {
    FlipJumpBlock fb;
    fb.index_ind = i_iota_ + k;
    fb.index_coef = i_g_ + k;
    fb.plan = [this, k](const Eigen::VectorXd& s) {
      double dsum = 0.0, esum = 0.0;
      for (std::size_t g = 0; g < stats_p_.patterns.size(); ++g) {
        const double lp = (has_cov_ ? s(i_rhoF_) : 0.0) * stats_p_.patterns[g][0] +
                          (has_cov_ ? s(i_rhoI_) : 0.0) * stats_p_.patterns[g][1];
        dsum += stats_p_.events(k, static_cast<Eigen::Index>(g));
        esum += std::exp(lp) * stats_p_.exposure(k, static_cast<Eigen::Index>(g));
      }
      FlipJumpPlan plan;
      // The slab-side proposal chases the interval likelihood rather than the
      // walk scale, which is unidentified while everything is pinned.
      if (dsum > 0.0 && esum > 0.0) {
        plan.mean0 = std::log(dsum / esum);
        plan.sd0 = 1.0 / std::sqrt(dsum);
      } else {
        plan.mean0 = crude_;
        plan.sd0 = 1.5;
      }
      plan.mean1 = s(i_g0_ + k);
      plan.sd1 = 1.0 / std::sqrt(hyper_.R);
      const double prec_rw = 1.0 / (s(i_sigma_) * s(i_sigma_));
      const double lnu = std::log(std::max(s(i_nu_), 1e-300));
      const double l1mnu = std::log(std::max(1.0 - s(i_nu_), 1e-300));
      const double prev = k > 0 ? s(i_g_ + k - 1) : 0.0;
      const double slab_prec = k > 0 ? prec_rw : kVaguePrecision;
      const double g0k = s(i_g0_ + k);
      const double R = hyper_.R;
      const bool next_slab = k + 1 < K_ && s(i_iota_ + k + 1) == 0.0;
      const double next = next_slab ? s(i_g_ + k + 1) : 0.0;
      plan.logpost = [dsum, esum, prev, slab_prec, g0k, R, lnu, l1mnu, next_slab, next,
                      prec_rw](double ind, double g) {
        double lp = dsum * g - esum * std::exp(g);
        lp += ind == 1.0 ? gaussian_logdensity(g, g0k, R) + lnu : gaussian_logdensity(g, prev, slab_prec) + l1mnu;
        if (next_slab) lp += gaussian_logdensity(next, g, prec_rw);
        return lp;
      };
      return plan;
    };
    return fb;
  }

  MetropolisBlock rho_block(int index, int which, const std::string& label) const {
    MetropolisBlock mb;
    mb.index = index;
    mb.label = label;
    mb.initial_step = 0.2;
    mb.make_logpost = [this, which](const Eigen::VectorXd& s) {
      double dsum = 0.0, esum = 0.0;
      for (std::size_t g = 0; g < stats_p_.patterns.size(); ++g) {
        if (stats_p_.patterns[g][static_cast<std::size_t>(which)] != 1) continue;
        const int other_ind = stats_p_.patterns[g][static_cast<std::size_t>(1 - which)];
        const double other = (which == 0 ? s(i_rhoI_) : s(i_rhoF_)) * other_ind;
        for (int k = 0; k < K_; ++k) {
          dsum += stats_p_.events(k, static_cast<Eigen::Index>(g));
          esum += std::exp(s(i_g_ + k) + other) * stats_p_.exposure(k, static_cast<Eigen::Index>(g));
        }
      }
      return std::function<double(double)>([dsum, esum](double r) {
        return dsum * r - esum * std::exp(r) - 0.5 * kVaguePrecision * r * r;
      });
    };
    return mb;
  }

  PweSuffStats stats_p_, stats_0_;
  GmcHyper hyper_;
  int K_;
  bool has_cov_;
  ForceIndicators force_;
  double crude_ = 0.0;
  std::vector<std::string> names_;
  int i_g_ = 0, i_g0_ = 0, i_rhoF_ = -1, i_rhoI_ = -1, i_sigma_ = 0, i_sigma0_ = 0, i_iota_ = 0, i_nu_ = 0;
};

// Gathers the log-hazard (and covariate) draws needed to evaluate curves.
struct HazardDraws {
  Eigen::MatrixXd gamma;  // total x K
  Eigen::VectorXd shift;  // total, rho'z
};

HazardDraws hazard_draws(const ChainSet& cs, int K, const CovariateSetting& setting) {
  if (setting.zF != 0 && setting.zI != 0)
    throw UnknownCovariateSetting("at most one treatment indicator may be active");
  const std::string prefix = setting.source == Source::primary ? "gamma[" : "gamma0[";
  std::vector<int> cols;
  for (int k = 1; k <= K; ++k) {
    const int j = cs.index_of(prefix + std::to_string(k) + "]");
    if (j < 0) throw UnknownCovariateSetting("fit does not contain the requested hazard curve");
    cols.push_back(j);
  }
  if (setting.source == Source::supplemental && (setting.zF != 0 || setting.zI != 0))
    throw UnknownCovariateSetting("supplemental curve has no treatment arms");
  const Eigen::Index total = static_cast<Eigen::Index>(cs.n_chains()) * cs.n_stored();
  HazardDraws hd;
  hd.gamma.resize(total, K);
  hd.shift = Eigen::VectorXd::Zero(total);
  Eigen::Index at = 0;
  for (const auto& m : cs.draws) {
    for (int k = 0; k < K; ++k) hd.gamma.col(k).segment(at, m.rows()) = m.col(cols[static_cast<std::size_t>(k)]);
    at += m.rows();
  }
  auto add_shift = [&](const char* name, int ind) {
    if (ind == 0) return;
    const int j = cs.index_of(name);
    if (j < 0) throw UnknownCovariateSetting(std::string("fit has no coefficient ") + name);
    Eigen::Index row = 0;
    for (const auto& m : cs.draws) {
      hd.shift.segment(row, m.rows()) += m.col(j);
      row += m.rows();
    }
  };
  add_shift("rho_F", setting.zF);
  add_shift("rho_I", setting.zI);
  return hd;
}

double cumulative_hazard(const Eigen::VectorXd& loghaz, const Partition& p, double t) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < loghaz.size(); ++k)
    h += std::exp(loghaz(k)) * interval_overlap(t, p.knots(k), p.knots(k + 1));
  return h;
}

// Smallest t with cumulative hazard log 2, or a negative value if unreached by 1.
double median_from_hazard(const Eigen::VectorXd& loghaz, const Partition& p) {
  const double target = std::log(2.0);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < loghaz.size(); ++k) {
    const double h = std::exp(loghaz(k));
    const double width = p.knots(k + 1) - p.knots(k);
    const double inc = h * width;
    if (acc + inc >= target) return p.knots(k) + (target - acc) / h;
    acc += inc;
  }
  return -1.0;
}

double quantile_sorted_copy(std::vector<double> v, double p) { return quantile_type7(std::move(v), p); }

}  // namespace

int SurvivalDataset::n_events() const {
  int e = 0;
  for (int v : event) e += v;
  return e;
}

void SurvivalDataset::validate() const {
  const std::size_t n = static_cast<std::size_t>(time.size());
  if (event.size() != n) throw DimensionMismatch("time and event lengths differ");
  if (n == 0) throw DimensionMismatch("empty dataset");
  for (Eigen::Index i = 0; i < time.size(); ++i)
    if (!(time(i) > 0.0 && time(i) <= 1.0)) throw RangeError("rescaled time outside (0,1]");
  for (int v : event)
    if (v != 0 && v != 1) throw RangeError("event indicator must be 0 or 1");
  if (has_covariates) {
    if (zF.size() != n || zI.size() != n) throw DimensionMismatch("covariate columns must cover every subject");
    for (std::size_t i = 0; i < n; ++i) {
      if ((zF[i] != 0 && zF[i] != 1) || (zI[i] != 0 && zI[i] != 1))
        throw RangeError("treatment indicators must be 0 or 1");
      if (zF[i] == 1 && zI[i] == 1) throw RangeError("treatment indicators are mutually exclusive");
    }
  } else if (!zF.empty() || !zI.empty()) {
    throw DimensionMismatch("covariate columns present together or absent together");
  }
}

Eigen::VectorXd rescale_time(const Eigen::VectorXd& days, double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  Eigen::VectorXd out(days.size());
  for (Eigen::Index i = 0; i < days.size(); ++i) {
    if (!(days(i) > 0.0)) throw NegativeTime("times must be positive");
    if (days(i) > horizon) throw OutOfHorizon("time exceeds the administrative horizon");
    out(i) = days(i) / horizon;
  }
  return out;
}

double pwe_loglik(const PweParams& params, const SurvivalDataset& data, const Partition& p) {
  data.validate();
  validate_partition(p);
  const int K = p.intervals();
  if (params.gamma.size() != K) throw DimensionMismatch("gamma length does not match partition");
  if (data.has_covariates && params.rho.size() != 2)
    throw DimensionMismatch("need two log hazard ratios for (z_F, z_I)");
  double ll = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double t = data.time(i);
    double lp = 0.0;
    if (data.has_covariates)
      lp = params.rho(0) * data.zF[static_cast<std::size_t>(i)] + params.rho(1) * data.zI[static_cast<std::size_t>(i)];
    double cum = 0.0;
    int k_at = 0;
    for (int k = 0; k < K; ++k) {
      cum += std::exp(params.gamma(k) + lp) * interval_overlap(t, p.knots(k), p.knots(k + 1));
      if (k + 1 < K && t > p.knots(k + 1)) k_at = k + 1;
    }
    ll -= cum;
    if (data.event[static_cast<std::size_t>(i)] == 1) ll += params.gamma(k_at) + lp;
  }
  return ll;
}

ChainSet fit_pwe_conventional(const SurvivalDataset& data, const Partition& p, const SamplerConfig& config) {
  PweConventionalModel model(data, p);
  return run_chains(model, config);
}

ChainSet fit_pwe_gmc(const SurvivalDataset& primary, const SurvivalDataset& supplemental,
                     const GmcHyper& hyper, const Partition& p, const SamplerConfig& config,
                     ForceIndicators force) {
  PweGmcModel model(primary, supplemental, hyper, p, force);
  return run_chains(model, config);
}

CurveSummary survival_curve(const ChainSet& cs, const Partition& p, const CovariateSetting& setting,
                            const Eigen::VectorXd& grid, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level outside (0,1)");
  validate_partition(p);
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (!(grid(i) >= 0.0 && grid(i) <= 1.0)) throw DomainError("grid outside [0,1]");
  const int K = p.intervals();
  const HazardDraws hd = hazard_draws(cs, K, setting);
  const Eigen::Index total = hd.gamma.rows();
  Eigen::MatrixXd S(total, grid.size());
  for (Eigen::Index d = 0; d < total; ++d) {
    const Eigen::VectorXd lh = (hd.gamma.row(d).transpose().array() + hd.shift(d)).matrix();
    for (Eigen::Index j = 0; j < grid.size(); ++j) S(d, j) = std::exp(-cumulative_hazard(lh, p, grid(j)));
  }
  CurveSummary out;
  out.grid = grid;
  out.level = level;
  const double pl = 0.5 * (1.0 - level);
  out.mean.resize(grid.size());
  out.lower.resize(grid.size());
  out.upper.resize(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    out.mean(j) = S.col(j).mean();
    std::vector<double> col(S.col(j).data(), S.col(j).data() + total);
    out.lower(j) = quantile_sorted_copy(col, pl);
    out.upper(j) = quantile_sorted_copy(col, 1.0 - pl);
  }
  return out;
}

MedianSummary median_survival(const ChainSet& cs, const Partition& p, const CovariateSetting& setting,
                              double horizon_days, double level) {
  if (!(horizon_days > 0.0)) throw ConfigError("horizon must be positive");
  validate_partition(p);
  const int K = p.intervals();
  const HazardDraws hd = hazard_draws(cs, K, setting);
  const Eigen::Index total = hd.gamma.rows();
  MedianSummary out;
  out.total = static_cast<int>(total);
  std::vector<double> medians;
  medians.reserve(static_cast<std::size_t>(total));
  Eigen::VectorXd mean_lh = Eigen::VectorXd::Zero(K);
  for (Eigen::Index d = 0; d < total; ++d) {
    const Eigen::VectorXd lh = (hd.gamma.row(d).transpose().array() + hd.shift(d)).matrix();
    mean_lh += lh;
    const double m = median_from_hazard(lh, p);
    if (m > 0.0)
      medians.push_back(m * horizon_days);
    else
      ++out.excluded;
  }
  mean_lh /= static_cast<double>(total);
  out.censored_at_horizon = median_from_hazard(mean_lh, p) <= 0.0;
  if (medians.empty()) {
    out.mean_days = out.lower_days = out.upper_days = std::numeric_limits<double>::quiet_NaN();
    out.censored_at_horizon = true;
    return out;
  }
  double acc = 0.0;
  for (double m : medians) acc += m;
  out.mean_days = acc / static_cast<double>(medians.size());
  const double pl = 0.5 * (1.0 - level);
  out.lower_days = quantile_sorted_copy(medians, pl);
  out.upper_days = quantile_sorted_copy(medians, 1.0 - pl);
  return out;
}

HazardRatioSummary hazard_ratio_summary(const ChainSet& cs, const std::string& treatment, double level) {
  std::string name;
  if (treatment == "F")
    name = "rho_F";
  else if (treatment == "I")
    name = "rho_I";
  else
    throw UnknownTreatment("treatment must be F or I");
  const int j = cs.index_of(name);
  if (j < 0) throw UnknownTreatment("fit has no coefficient for treatment " + treatment);
  const Eigen::VectorXd rho = cs.pooled(j);
  std::vector<double> hr(static_cast<std::size_t>(rho.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    hr[static_cast<std::size_t>(i)] = std::exp(rho(i));
    acc += hr[static_cast<std::size_t>(i)];
  }
  HazardRatioSummary out;
  out.mean = acc / static_cast<double>(rho.size());
  const double pl = 0.5 * (1.0 - level);
  out.lower = quantile_sorted_copy(hr, pl);
  out.upper = quantile_sorted_copy(hr, 1.0 - pl);
  return out;
}

KaplanMeier kaplan_meier(const SurvivalDataset& data) {
  data.validate();
  std::vector<std::pair<double, int>> obs;
  obs.reserve(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) obs.emplace_back(data.time(i), data.event[static_cast<std::size_t>(i)]);
  std::sort(obs.begin(), obs.end());
  std::vector<double> times, surv;
  std::vector<int> at_risk, events;
  double S = 1.0;
  std::size_t i = 0;
  const std::size_t n = obs.size();
  while (i < n) {
    const double t = obs[i].first;
    int d = 0;
    std::size_t j = i;
    while (j < n && obs[j].first == t) {
      d += obs[j].second;
      ++j;
    }
    const int risk = static_cast<int>(n - i);
    if (d > 0) S *= 1.0 - static_cast<double>(d) / static_cast<double>(risk);
    times.push_back(t);
    surv.push_back(S);
    at_risk.push_back(risk);
    events.push_back(d);
    i = j;
  }
  KaplanMeier km;
  km.time = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  km.survival = Eigen::Map<Eigen::VectorXd>(surv.data(), static_cast<Eigen::Index>(surv.size()));
  km.at_risk = std::move(at_risk);
  km.events = std::move(events);
  return km;
}

std::vector<PartitionReport> select_partition_dic(const SurvivalDataset& data,
                                                  const std::vector<PartitionCandidate>& candidates,
                                                  const SamplerConfig& config) {
  if (candidates.empty()) throw ConfigError("no candidate partitions");
  std::vector<PartitionReport> reports;
  std::vector<PartitionScore> scores;
  for (const auto& cand : candidates) {
    const ChainSet cs = fit_pwe_conventional(data, cand.partition, config);
    const Eigen::VectorXd mean = cs.posterior_mean();
    const int K = cand.partition.intervals();
    PweParams params;
    params.gamma = mean.head(K);
    if (data.has_covariates) params.rho = mean.segment(K, 2);
    const double dev_at_mean = -2.0 * pwe_loglik(params, data, cand.partition);
    const DicResult dic = compute_dic(cs.pooled_deviance(), dev_at_mean);
    PartitionReport r;
    r.label = cand.label;
    r.K = cand.K;
    r.spacing = cand.spacing;
    r.dbar = dic.dbar;
    r.pd = dic.pd;
    r.dic = dic.dic;
    reports.push_back(r);
    scores.push_back(PartitionScore{cand.label, dic.dbar, dic.dic});
  }
  const std::vector<PartitionScore> ranked = compare_partitions(scores);
  std::vector<PartitionReport> out;
  for (const auto& s : ranked)
    for (const auto& r : reports)
      if (r.label == s.label) {
        out.push_back(r);
        break;
      }
  return out;
}

}  // namespace gmc

#include "gmcborrow/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmcborrow/errors.hpp"
#include "gmcborrow/spline.hpp"
#include "gmcborrow/threads.hpp"

namespace gmc {

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("need at least one chain");
  if (burn_in < 0) throw ConfigError("burn-in must be nonnegative");
  if (iterations < 1) throw ConfigError("need at least one kept iteration");
  if (thin < 1) throw ConfigError("thinning interval must be >= 1");
  if (thin > iterations) throw ConfigError("thinning interval exceeds iterations");
}

int ChainSet::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<int>(j);
  return -1;
}

Eigen::VectorXd ChainSet::pooled(int param) const {
  if (param < 0 || param >= n_params()) throw DimensionMismatch("parameter index out of range");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_chains()) * n_stored());
  Eigen::Index at = 0;
  for (const auto& m : draws) {
    out.segment(at, m.rows()) = m.col(param);
    at += m.rows();
  }
  return out;
}

Eigen::VectorXd ChainSet::pooled_deviance() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_chains()) * n_stored());
  Eigen::Index at = 0;
  for (const auto& v : deviance) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

Eigen::VectorXd ChainSet::posterior_mean() const {
  if (draws.empty() || n_stored() == 0) throw EmptyDraws("no stored draws");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_params());
  long total = 0;
  for (const auto& d : draws) {
    m += d.colwise().sum().transpose();
    total += d.rows();
  }
  return m / static_cast<double>(total);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_block_moments(const GaussianTerms& t) {
  const Eigen::MatrixXd Q = t.prior_precision + t.obs_precision;
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("full-conditional precision not positive definite");
  const Eigen::VectorXd r = t.obs_weighted + t.prior_precision * t.prior_mean;
  return {llt.solve(r), llt.solve(Eigen::MatrixXd::Identity(Q.rows(), Q.cols()))};
}

Eigen::VectorXd update_gaussian_block(const GaussianTerms& t, Rng& rng) {
  const Eigen::MatrixXd Q = t.prior_precision + t.obs_precision;
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("full-conditional precision not positive definite");
  const Eigen::VectorXd r = t.obs_weighted + t.prior_precision * t.prior_mean;
  const Eigen::VectorXd mean = llt.solve(r);
  Eigen::VectorXd z(Q.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  // x = mean + L^{-T} z has covariance Q^{-1}
  return mean + llt.matrixU().solve(z);
}

std::pair<double, bool> update_metropolis_scalar(double current, const std::function<double(double)>& logpost,
                                                 AdaptiveStep& step, bool adapt, Rng& rng) {
  const double lp0 = logpost(current);
  if (!std::isfinite(lp0)) throw NonfiniteLogPosterior("log posterior nonfinite at current value");
  const double proposal = current + step.step * rng.normal();
  const double lp1 = logpost(proposal);
  const double diff = lp1 - lp0;
  bool accepted = false;
  if (std::isfinite(lp1) && std::log(rng.uniform()) < diff) accepted = true;
  if (adapt) {
    // Robbins-Monro drift of log step toward 0.44 acceptance
    const double alpha = std::isfinite(lp1) ? std::min(1.0, std::exp(diff)) : 0.0;
    ++step.updates;
    const double gain = std::pow(static_cast<double>(step.updates), -0.7);
    step.step = std::clamp(step.step * std::exp(gain * (alpha - 0.44)), 1e-8, 1e8);
  }
  return {accepted ? proposal : current, accepted};
}

double update_sigma_slice(double current, const std::function<double(double)>& logpost, double lower,
                          double upper, Rng& rng) {
  if (!(lower < current && current < upper)) throw BoundsViolation("slice start outside its bounds");
  const double lp0 = logpost(current);
  if (!std::isfinite(lp0)) throw NonfiniteLogPosterior("log posterior nonfinite at current value");
  const double level = lp0 + std::log(rng.uniform());
  double lo = lower, hi = upper;
  for (int it = 0; it < 1000; ++it) {
    const double x = rng.uniform(lo, hi);
    if (logpost(x) >= level) return x;
    if (x < current)
      lo = x;
    else
      hi = x;
    if (hi - lo < 1e-14 * (upper - lower)) break;
  }
  return current;  // interval shrank to nothing; keep the current value
}

namespace {

struct MetropolisTally {
  long proposals = 0;
  long accepted = 0;
};

void run_one_chain(const PosteriorModel& model, const SamplerConfig& config, int chain, int stored,
                   Eigen::MatrixXd& out_draws, Eigen::VectorXd& out_dev,
                   std::vector<MetropolisTally>& tallies, std::vector<std::string>& labels) {
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(chain)));
  Eigen::VectorXd state = model.initial_state(chain, rng);
  const int P = static_cast<int>(model.parameter_names().size());
  if (state.size() != P) throw ModelError("initial state length does not match parameter names");
  std::vector<Block> blocks = model.blocks();

  std::vector<AdaptiveStep> steps;
  labels.clear();
  for (const auto& b : blocks) {
    if (const auto* m = std::get_if<MetropolisBlock>(&b)) {
      steps.push_back(AdaptiveStep{m->initial_step, 0});
      labels.push_back(m->label);
    } else if (const auto* p = std::get_if<PairShiftBlock>(&b)) {
      steps.push_back(AdaptiveStep{p->initial_step, 0});
      labels.push_back(p->label);
    }
  }
  tallies.assign(labels.size(), MetropolisTally{});

  out_draws.resize(stored, P);
  out_dev.resize(stored);
  const long total = static_cast<long>(config.burn_in) + config.iterations;
  int row = 0;
  for (long it = 0; it < total; ++it) {
    const bool adapt = it < config.burn_in;
    std::size_t met = 0;
    for (const auto& blk : blocks) {
      if (const auto* g = std::get_if<GaussianBlock>(&blk)) {
        const Eigen::VectorXd x = update_gaussian_block(g->terms(state), rng);
        if (x.size() != static_cast<Eigen::Index>(g->indices.size()))
          throw ModelError("Gaussian block dimension mismatch");
        for (std::size_t i = 0; i < g->indices.size(); ++i) state(g->indices[i]) = x(static_cast<Eigen::Index>(i));
      } else if (const auto* m = std::get_if<MetropolisBlock>(&blk)) {
        auto lp = m->make_logpost(state);
        auto [value, accepted] = update_metropolis_scalar(state(m->index), lp, steps[met], adapt, rng);
        state(m->index) = value;
        if (!adapt) {
          ++tallies[met].proposals;
          if (accepted) ++tallies[met].accepted;
        }
        ++met;
      } else if (const auto* p = std::get_if<PairShiftBlock>(&blk)) {
        auto lp = p->make_logpost(state);
        // The walker lives on the shared offset; a rejected move returns 0.
        auto [shift, accepted] = update_metropolis_scalar(0.0, lp, steps[met], adapt, rng);
        state(p->index_a) += shift;
        state(p->index_b) += shift;
        if (!adapt) {
          ++tallies[met].proposals;
          if (accepted) ++tallies[met].accepted;
        }
        ++met;
      } else if (const auto* fj = std::get_if<FlipJumpBlock>(&blk)) {
        const FlipJumpPlan plan = fj->plan(state);
        const double cur_i = state(fj->index_ind);
        const double cur_x = state(fj->index_coef);
        const double new_i = cur_i == 1.0 ? 0.0 : 1.0;
        const double fm = new_i == 1.0 ? plan.mean1 : plan.mean0;
        const double fs = new_i == 1.0 ? plan.sd1 : plan.sd0;
        const double bm = cur_i == 1.0 ? plan.mean1 : plan.mean0;
        const double bs = cur_i == 1.0 ? plan.sd1 : plan.sd0;
        const double prop = fm + fs * rng.normal();
        const double loga = plan.logpost(new_i, prop) - plan.logpost(cur_i, cur_x) +
                            gaussian_logdensity(cur_x, bm, 1.0 / (bs * bs)) -
                            gaussian_logdensity(prop, fm, 1.0 / (fs * fs));
        if (loga >= 0.0 || rng.uniform() < std::exp(loga)) {
          state(fj->index_ind) = new_i;
          state(fj->index_coef) = prop;
        }
      } else if (const auto* s = std::get_if<SliceBlock>(&blk)) {
        auto lp = s->make_logpost(state);
        state(s->index) = update_sigma_slice(state(s->index), lp, s->lower, s->upper, rng);
      } else if (const auto* ind = std::get_if<IndicatorBlock>(&blk)) {
        const IndicatorOdds o = ind->odds(state);
        const double p = mixture_indicator_prob(o.log_spike, o.log_slab, o.prior_spike);
        state(ind->index) = rng.uniform() < p ? 1.0 : 0.0;
      } else if (const auto* bb = std::get_if<BetaConjugateBlock>(&blk)) {
        const BetaParams bp = bb->params(state);
        state(bb->index) = rng.beta(bp.a, bp.b);
      }
    }
    if (!adapt) {
      const long j = it - config.burn_in;
      if ((j + 1) % config.thin == 0) {
        const double dev = model.deviance(state);
        if (!std::isfinite(dev))
          throw NonfiniteDeviance("nonfinite deviance in chain " + std::to_string(chain) + " at iteration " +
                                  std::to_string(j + 1));
        out_draws.row(row) = state.transpose();
        out_dev(row) = dev;
        ++row;
      }
    }
  }
}

}  // namespace

ChainSet run_chains(const PosteriorModel& model, const SamplerConfig& config) {
  config.validate();
  const int stored = config.iterations / config.thin;
  ChainSet cs;
  cs.names = model.parameter_names();
  cs.draws.resize(static_cast<std::size_t>(config.chains));
  cs.deviance.resize(static_cast<std::size_t>(config.chains));
  std::vector<std::vector<MetropolisTally>> tallies(static_cast<std::size_t>(config.chains));
  std::vector<std::vector<std::string>> labels(static_cast<std::size_t>(config.chains));
  parallel_for(config.chains, [&](int c) {
    run_one_chain(model, config, c, stored, cs.draws[static_cast<std::size_t>(c)],
                  cs.deviance[static_cast<std::size_t>(c)], tallies[static_cast<std::size_t>(c)],
                  labels[static_cast<std::size_t>(c)]);
  });
  // Acceptance rates pooled across chains, in block order.
  if (!labels.empty() && !labels[0].empty()) {
    for (std::size_t b = 0; b < labels[0].size(); ++b) {
      long prop = 0, acc = 0;
      for (int c = 0; c < config.chains; ++c) {
        prop += tallies[static_cast<std::size_t>(c)][b].proposals;
        acc += tallies[static_cast<std::size_t>(c)][b].accepted;
      }
      cs.accept_rates.emplace_back(labels[0][b], prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0);
    }
  }
  return cs;
}

double compute_rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw InsufficientDraws("split-Rhat needs at least two chains");
  Eigen::Index n = chains[0].size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw InsufficientDraws("split-Rhat needs at least 4 draws per chain");
  const Eigen::Index half = n / 2;
  std::vector<Eigen::VectorXd> seq;
  for (const auto& c : chains) {
    seq.push_back(c.head(half));
    seq.push_back(c.segment(half, half));
  }
  const std::size_t m = seq.size();
  Eigen::VectorXd means(static_cast<Eigen::Index>(m));
  double W = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double mu = seq[j].mean();
    means(static_cast<Eigen::Index>(j)) = mu;
    W += (seq[j].array() - mu).square().sum() / static_cast<double>(half - 1);
  }
  W /= static_cast<double>(m);
  const double grand = means.mean();
  const double B = static_cast<double>(half) * (means.array() - grand).square().sum() / static_cast<double>(m - 1);
  if (W == 0.0) return B == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus =
      (static_cast<double>(half - 1) / static_cast<double>(half)) * W + B / static_cast<double>(half);
  return std::sqrt(var_plus / W);
}

double compute_ess(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw InsufficientDraws("no chains");
  Eigen::Index n = chains[0].size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw InsufficientDraws("effective sample size needs at least 4 draws");
  const std::size_t m = chains.size();
  const double total = static_cast<double>(m) * static_cast<double>(n);

  std::vector<double> means(m), vars(m);
  double W = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = chains[j].head(n).mean();
    vars[j] = (chains[j].head(n).array() - means[j]).square().sum() / static_cast<double>(n - 1);
    W += vars[j];
  }
  W /= static_cast<double>(m);
  double var_plus = (static_cast<double>(n - 1) / static_cast<double>(n)) * W;
  if (m > 1) {
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double B = 0.0;
    for (double mu : means) B += (mu - grand) * (mu - grand);
    B *= static_cast<double>(n) / static_cast<double>(m - 1);
    var_plus += B / static_cast<double>(n);
  }
  if (var_plus <= 0.0) return total;

  auto autocov = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& c = chains[j];
      double s = 0.0;
      for (Eigen::Index i = 0; i < n - lag; ++i) s += (c(i) - means[j]) * (c(i + lag) - means[j]);
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };

  // Geyer initial monotone positive sequence on paired autocorrelations.
  double sum_rho = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index lag = 1; lag + 1 < n; lag += 2) {
    const double rho_a = 1.0 - (W - autocov(lag)) / var_plus;
    const double rho_b = 1.0 - (W - autocov(lag + 1)) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum_rho += pair;
    if (lag > 2000) break;
  }
  const double ess = total / (1.0 + 2.0 * sum_rho);
  return std::clamp(ess, 1e-8, total);
}

Diagnostics diagnostics(const ChainSet& cs) {
  Diagnostics d;
  d.accept_rates = cs.accept_rates;
  const int P = cs.n_params();
  d.rhat.resize(static_cast<std::size_t>(P), std::numeric_limits<double>::quiet_NaN());
  d.ess.resize(static_cast<std::size_t>(P), std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < P; ++j) {
    std::vector<Eigen::VectorXd> per_chain;
    per_chain.reserve(cs.draws.size());
    for (const auto& m : cs.draws) per_chain.push_back(m.col(j));
    try {
      if (per_chain.size() >= 2) d.rhat[static_cast<std::size_t>(j)] = compute_rhat(per_chain);
      d.ess[static_cast<std::size_t>(j)] = compute_ess(per_chain);
    } catch (const InsufficientDraws&) {
      // leave NaN
    }
  }
  return d;
}

DicResult compute_dic(const Eigen::VectorXd& deviance_draws, double deviance_at_mean) {
  if (deviance_draws.size() == 0) throw EmptyDraws("no deviance draws");
  DicResult r;
  r.dbar = deviance_draws.mean();
  r.pd = r.dbar - deviance_at_mean;
  r.dic = r.dbar + r.pd;
  r.negative_pd = r.pd < 0.0;
  return r;
}

std::vector<SummaryRow> summarize(const ChainSet& cs, const std::vector<double>& probabilities) {
  if (cs.n_chains() == 0 || cs.n_stored() == 0) throw EmptyDraws("no draws to summarize");
  for (double p : probabilities)
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0,1]");
  std::vector<SummaryRow> rows;
  rows.reserve(cs.names.size());
  for (int j = 0; j < cs.n_params(); ++j) {
    const Eigen::VectorXd pool = cs.pooled(j);
    SummaryRow row;
    row.name = cs.names[static_cast<std::size_t>(j)];
    row.mean = pool.mean();
    const Eigen::Index n = pool.size();
    row.sd = n > 1 ? std::sqrt((pool.array() - row.mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
    std::vector<double> vals(pool.data(), pool.data() + n);
    for (double p : probabilities) row.quantiles.push_back(quantile_type7(vals, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<PartitionScore> compare_partitions(std::vector<PartitionScore> fits) {
  std::sort(fits.begin(), fits.end(), [](const PartitionScore& a, const PartitionScore& b) {
    if (a.dic != b.dic) return a.dic < b.dic;
    if (a.dbar != b.dbar) return a.dbar < b.dbar;
    return a.label < b.label;
  });
  return fits;
}

}  // namespace gmc

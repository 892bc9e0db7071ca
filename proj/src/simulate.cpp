#include "gmcborrow/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gmcborrow/errors.hpp"
#include "gmcborrow/rng.hpp"
#include "gmcborrow/threads.hpp"

namespace gmc {

void SimConfig::validate() const {
  if (d_grid.empty()) throw ValidationError("drift grid is empty");
  for (double d : d_grid) {
    if (!std::isfinite(d) || d < 0.0) throw ValidationError("drift values must be finite and nonnegative");
  }
  if (N < 2 || N0 < 2) throw ValidationError("each dataset needs at least two observations");
  if (!(sigma > 0.0) || !(sigma0 > 0.0)) throw NonpositiveSigma("noise scales must be positive");
  if (M < 1) throw ValidationError("replicate count must be at least 1");
  if (K < 2) throw ValidationError("partition needs at least two intervals");
  sampler.validate();
  curve_hyper.validate();
  intercept_hyper.validate();
}

double true_mean(double t, double d) {
  const double a = 5.0 + d;
  return a * t * std::sin(a * t);
}

namespace {

RegressionDataset make_dataset(int n, double drift, double sigma, Source source, Rng& rng) {
  RegressionDataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.source = source;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    ds.t(i) = t;
    ds.y(i) = true_mean(t, drift) + rng.normal(0.0, sigma);
  }
  return ds;
}

// pooling throws both sources into one conventional fit, so the label is moot
RegressionDataset concatenate(const RegressionDataset& a, const RegressionDataset& b) {
  RegressionDataset out;
  const int n = a.n() + b.n();
  out.y.resize(n);
  out.t.resize(n);
  out.y << a.y, b.y;
  out.t << a.t, b.t;
  out.source = a.source;
  return out;
}

}  // namespace

std::pair<RegressionDataset, RegressionDataset> generate_pair(double d, const SimConfig& cfg,
                                                              std::uint64_t replicate_seed) {
  Rng rng(derive_seed(replicate_seed, 1));
  RegressionDataset primary = make_dataset(cfg.N, 0.0, cfg.sigma, Source::primary, rng);
  RegressionDataset suppl = make_dataset(cfg.N0, d, cfg.sigma0, Source::supplemental, rng);
  return {std::move(primary), std::move(suppl)};
}

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::primary_alone: return "primary_alone";
    case Estimator::pooled: return "pooled";
    case Estimator::gmc: return "gmc";
  }
  return "unknown";
}

Criteria compute_criteria(const CurveSummary& fit, const Eigen::VectorXd& truth) {
  const int n = static_cast<int>(fit.mean.size());
  if (n == 0) throw DimensionMismatch("curve summary is empty");
  if (truth.size() != n) throw DimensionMismatch("truth grid does not match curve summary");
  Criteria c;
  double sq = 0.0;
  int covered = 0;
  for (int i = 0; i < n; ++i) {
    const double err = fit.mean(i) - truth(i);
    c.me += err;
    sq += err * err;
    c.criw += fit.upper(i) - fit.lower(i);
    if (fit.lower(i) <= truth(i) && truth(i) <= fit.upper(i)) ++covered;
  }
  c.me /= n;
  c.rmse = std::sqrt(sq / n);
  c.criw /= n;
  c.cp = static_cast<double>(covered) / n;
  return c;
}

namespace {

struct Slot {
  bool ok = false;
  CriteriaRecord record;
};

}  // namespace

StudyResult run_study(const SimConfig& cfg) {
  cfg.validate();

  const Partition part = build_partition(cfg.K, KnotSpacing::equal, Eigen::VectorXd());
  const int n_est = 3;
  std::vector<Slot> slots(static_cast<std::size_t>(cfg.M) * n_est);
  std::vector<FailedReplicate> failures(cfg.M);
  std::vector<char> failed(cfg.M, 0);

  parallel_for(cfg.M, [&](int r) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    double d = 0.0;
    {
      Rng pick(derive_seed(rep_seed, 0));
      if (cfg.mode == SimConfig::Mode::stratified) {
        d = cfg.d_grid[static_cast<std::size_t>(r) % cfg.d_grid.size()];
      } else {
        auto idx = static_cast<std::size_t>(pick.uniform() * static_cast<double>(cfg.d_grid.size()));
        if (idx >= cfg.d_grid.size()) idx = cfg.d_grid.size() - 1;
        d = cfg.d_grid[idx];
      }
    }
    try {
      auto [primary, suppl] = generate_pair(d, cfg, rep_seed);

      Eigen::VectorXd truth(primary.n());
      for (int i = 0; i < primary.n(); ++i) truth(i) = true_mean(primary.t(i), 0.0);
      const Eigen::VectorXd grid = primary.t;

      for (int e = 0; e < n_est; ++e) {
        const auto est = static_cast<Estimator>(e);
        SamplerConfig sampler = cfg.sampler;
        sampler.seed = derive_seed(rep_seed, 2 + static_cast<std::uint64_t>(e));

        ChainSet cs;
        const CurveSelector sel = CurveSelector::primary();
        switch (est) {
          case Estimator::primary_alone:
            cs = fit_regression_conventional(primary, part, sampler);
            break;
          case Estimator::pooled:
            cs = fit_regression_conventional(concatenate(primary, suppl), part, sampler);
            break;
          case Estimator::gmc: {
            GmcRegressionSpec spec;
            spec.partition = part;
            spec.curve_hyper = cfg.curve_hyper;
            spec.intercept_hyper = cfg.intercept_hyper;
            cs = fit_regression_gmc(primary, suppl, spec, sampler);
            break;
          }
        }
        const CurveSummary fit = predict_curve(cs, part, sel, grid, 0.95);

        Slot& slot = slots[static_cast<std::size_t>(r) * n_est + e];
        slot.record.replicate = r;
        slot.record.seed = rep_seed;
        slot.record.d = d;
        slot.record.estimator = est;
        slot.record.criteria = compute_criteria(fit, truth);
        slot.ok = true;
      }
    } catch (const std::exception& ex) {
      failed[r] = 1;
      failures[r] = FailedReplicate{r, rep_seed, d, ex.what()};
      for (int e = 0; e < n_est; ++e) slots[static_cast<std::size_t>(r) * n_est + e].ok = false;
    }
  });

  StudyResult result;
  for (int r = 0; r < cfg.M; ++r) {
    if (failed[r]) {
      result.failures.push_back(failures[r]);
      continue;
    }
    for (int e = 0; e < n_est; ++e) {
      const Slot& slot = slots[static_cast<std::size_t>(r) * n_est + e];
      if (slot.ok) result.records.push_back(slot.record);
    }
  }

  // exact per-cell averages; cells keyed by (d, estimator)
  std::map<std::pair<double, int>, std::vector<Criteria>> cells;
  for (const auto& rec : result.records) {
    cells[{rec.d, static_cast<int>(rec.estimator)}].push_back(rec.criteria);
  }
  for (const auto& [key, vals] : cells) {
    StudyRow row;
    row.d = key.first;
    row.estimator = static_cast<Estimator>(key.second);
    row.count = static_cast<int>(vals.size());
    auto accumulate = [&](auto get, double& mean_out, double& se_out) {
      double s = 0.0;
      for (const auto& v : vals) s += get(v);
      const double m = s / row.count;
      double ss = 0.0;
      for (const auto& v : vals) {
        const double dd = get(v) - m;
        ss += dd * dd;
      }
      mean_out = m;
      se_out = row.count > 1 ? std::sqrt(ss / (row.count - 1)) / std::sqrt(static_cast<double>(row.count)) : 0.0;
    };
    accumulate([](const Criteria& c) { return c.me; }, row.me_mean, row.me_se);
    accumulate([](const Criteria& c) { return c.rmse; }, row.rmse_mean, row.rmse_se);
    accumulate([](const Criteria& c) { return c.criw; }, row.criw_mean, row.criw_se);
    accumulate([](const Criteria& c) { return c.cp; }, row.cp_mean, row.cp_se);
    result.table.push_back(row);
  }
  return result;
}

}  // namespace gmc

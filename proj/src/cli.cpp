#include "gmcborrow/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmcborrow/csv.hpp"
#include "gmcborrow/engine.hpp"
#include "gmcborrow/errors.hpp"
#include "gmcborrow/manifest.hpp"
#include "gmcborrow/regression.hpp"
#include "gmcborrow/simulate.hpp"
#include "gmcborrow/spline.hpp"
#include "gmcborrow/survival.hpp"
#include "gmcborrow/version.hpp"

namespace fs = std::filesystem;

namespace gmc {
namespace {

const std::vector<double> kSummaryProbs = {0.025, 0.5, 0.975};

struct SamplerOpts {
  int chains = 2;
  int burn_in = 1000;
  int iterations = 5000;
  int thin = 1;
  std::uint64_t seed = 12345;

  SamplerConfig to_config() const {
    SamplerConfig c;
    c.chains = chains;
    c.burn_in = burn_in;
    c.iterations = iterations;
    c.thin = thin;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void add_sampler_options(CLI::App* sub, SamplerOpts& s, int burn_default, int iter_default) {
  s.burn_in = burn_default;
  s.iterations = iter_default;
  sub->add_option("--chains", s.chains, "independent chains")->capture_default_str();
  sub->add_option("--burn_in,--burn-in", s.burn_in, "discarded warm-up iterations per chain")
      ->capture_default_str();
  sub->add_option("--iterations", s.iterations, "kept iterations per chain (before thinning)")
      ->capture_default_str();
  sub->add_option("--thin", s.thin, "keep every thin-th iteration")->capture_default_str();
  sub->add_option("--seed", s.seed, "master seed; chains and replicates derive their own streams")
      ->capture_default_str();
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_g17(v[i]);
  }
  return out;
}

Eigen::VectorXd make_grid(int points) {
  if (points < 2) throw ConfigError("grid_points must be at least 2");
  Eigen::VectorXd g(points);
  for (int i = 0; i < points; ++i) g(i) = static_cast<double>(i) / (points - 1);
  return g;
}

Partition partition_from(int K, const std::string& spacing, const Eigen::VectorXd& times) {
  if (spacing == "equal") return build_partition(K, KnotSpacing::equal, Eigen::VectorXd());
  if (spacing == "quantile") return build_partition(K, KnotSpacing::quantile, times);
  throw ConfigError("spacing must be equal or quantile, got '" + spacing + "'");
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void report_warnings(const ChainSet& cs) {
  for (const auto& w : cs.warnings) std::cerr << "warning: " << w << '\n';
}

void write_bundle(const fs::path& dir, const ChainSet& cs) {
  write_draws_csv((dir / "draws.csv").string(), cs);
  write_summary_csv((dir / "summary.csv").string(), summarize(cs, kSummaryProbs), kSummaryProbs);
  write_diagnostics_csv((dir / "diagnostics.csv").string(), cs.names, diagnostics(cs));
}

void finish(RunManifest& man, const fs::path& dir) {
  man.finished = utc_timestamp();
  write_manifest_json((dir / "manifest.json").string(), man);
  std::cout << "run " << man.run_id() << " complete; outputs in " << dir.string() << '\n';
}

void check_pair(const std::vector<double>& v, const char* what) {
  if (v.size() != 2) throw ConfigError(std::string(what) + " needs exactly two values a1,a2");
  if (!(v[0] > 0.0) || !(v[1] > 0.0)) throw ConfigError(std::string(what) + " values must be positive");
}

// ---- handlers ----------------------------------------------------------

struct FitRegressionOpts {
  std::string data, out, spacing = "equal";
  bool rescale = false;
  int K = 10, grid_points = 101;
  double level = 0.95;
  SamplerOpts sampler;
};

void run_fit_regression(const FitRegressionOpts& o) {
  RunManifest man;
  man.command = "fit-regression";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.data);
  man.set_config_sorted({{"K", std::to_string(o.K)},
                         {"spacing", o.spacing},
                         {"rescale", bool_str(o.rescale)},
                         {"grid_points", std::to_string(o.grid_points)},
                         {"level", format_g17(o.level)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const RegressionDataset data = parse_regression_csv(o.data, o.rescale);
  const Partition part = partition_from(o.K, o.spacing, data.t);
  const ChainSet cs = fit_regression_conventional(data, part, o.sampler.to_config());
  report_warnings(cs);

  const fs::path dir = prepare_out(o.out);
  write_bundle(dir, cs);
  const Eigen::VectorXd grid = make_grid(o.grid_points);
  write_curve_csv((dir / "curve.csv").string(),
                  predict_curve(cs, part, CurveSelector::primary(), grid, o.level));
  write_curve_csv((dir / "derivative.csv").string(),
                  predict_derivative(cs, part, CurveSelector::primary(), grid, o.level));
  finish(man, dir);
}

struct FitRegressionGmcOpts {
  std::string primary, supplemental, out, spacing = "equal";
  bool rescale = false;
  int K = 10, grid_points = 101;
  double level = 0.95;
  double R = 2000.0, p0 = 0.5, slab_lower = 0.0, slab_upper = 2.0;
  std::vector<double> nu_prior = {0.5, 0.5};
  SamplerOpts sampler;
};

void run_fit_regression_gmc(const FitRegressionGmcOpts& o) {
  check_pair(o.nu_prior, "nu_prior");
  RunManifest man;
  man.command = "fit-regression-gmc";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.primary);
  man.add_input(o.supplemental);
  man.set_config_sorted({{"K", std::to_string(o.K)},
                         {"spacing", o.spacing},
                         {"rescale", bool_str(o.rescale)},
                         {"grid_points", std::to_string(o.grid_points)},
                         {"level", format_g17(o.level)},
                         {"R", format_g17(o.R)},
                         {"p0", format_g17(o.p0)},
                         {"slab_lower", format_g17(o.slab_lower)},
                         {"slab_upper", format_g17(o.slab_upper)},
                         {"nu_prior", join_doubles(o.nu_prior)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const RegressionDataset primary = parse_regression_csv(o.primary, o.rescale);
  const RegressionDataset suppl = parse_regression_csv(o.supplemental, o.rescale);

  Eigen::VectorXd all_t(primary.n() + suppl.n());
  all_t << primary.t, suppl.t;
  const Partition part = partition_from(o.K, o.spacing, all_t);

  GmcRegressionSpec spec;
  spec.partition = part;
  spec.curve_hyper = GmcHyper{o.R, o.nu_prior[0], o.nu_prior[1]};
  spec.intercept_hyper = CommensurateHyper{o.slab_lower, o.slab_upper, o.R, o.p0};
  const ChainSet cs = fit_regression_gmc(primary, suppl, spec, o.sampler.to_config());
  report_warnings(cs);

  const fs::path dir = prepare_out(o.out);
  write_bundle(dir, cs);
  const Eigen::VectorXd grid = make_grid(o.grid_points);
  write_curve_csv((dir / "curve_primary.csv").string(),
                  predict_curve(cs, part, CurveSelector::primary(), grid, o.level));
  write_curve_csv((dir / "curve_supplemental.csv").string(),
                  predict_curve(cs, part, CurveSelector::supplemental(), grid, o.level));
  write_curve_csv((dir / "derivative_primary.csv").string(),
                  predict_derivative(cs, part, CurveSelector::primary(), grid, o.level));
  finish(man, dir);
}

struct FitCtpOpts {
  std::string data, out, spacing = "quantile";
  bool rescale = false;
  int K = 10, grid_points = 101;
  double level = 0.95;
  double R = 500.0, p0 = 0.10, slab_lower = 0.01, slab_upper = 0.50;
  std::vector<double> nu_prior = {0.10, 0.90};
  SamplerOpts sampler;
};

void run_fit_ctp(const FitCtpOpts& o) {
  check_pair(o.nu_prior, "nu_prior");
  RunManifest man;
  man.command = "fit-ctp";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.data);
  man.set_config_sorted({{"K", std::to_string(o.K)},
                         {"spacing", o.spacing},
                         {"rescale", bool_str(o.rescale)},
                         {"grid_points", std::to_string(o.grid_points)},
                         {"level", format_g17(o.level)},
                         {"R", format_g17(o.R)},
                         {"p0", format_g17(o.p0)},
                         {"slab_lower", format_g17(o.slab_lower)},
                         {"slab_upper", format_g17(o.slab_upper)},
                         {"nu_prior", join_doubles(o.nu_prior)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const RegressionDataset data = parse_regression_csv(o.data, o.rescale);
  const Partition part = partition_from(o.K, o.spacing, data.t);

  GmcRegressionSpec spec;
  spec.partition = part;
  spec.curve_hyper = GmcHyper{o.R, o.nu_prior[0], o.nu_prior[1]};
  spec.intercept_hyper = CommensurateHyper{o.slab_lower, o.slab_upper, o.R, o.p0};
  const ChainSet cs = fit_ctp_gmc(data, spec, o.sampler.to_config());
  report_warnings(cs);

  const fs::path dir = prepare_out(o.out);
  write_bundle(dir, cs);
  const Eigen::VectorXd grid = make_grid(o.grid_points);
  write_curve_csv((dir / "curve_cancerous.csv").string(),
                  predict_curve(cs, part, CurveSelector::cancerous(), grid, o.level));
  write_curve_csv((dir / "curve_noncancerous.csv").string(),
                  predict_curve(cs, part, CurveSelector::noncancerous(), grid, o.level));
  write_curve_csv((dir / "derivative_cancerous.csv").string(),
                  predict_derivative(cs, part, CurveSelector::cancerous(), grid, o.level));
  write_curve_csv((dir / "derivative_noncancerous.csv").string(),
                  predict_derivative(cs, part, CurveSelector::noncancerous(), grid, o.level));
  finish(man, dir);
}

struct FitSurvivalOpts {
  std::string data, out, spacing = "equal";
  double horizon = 730.0;
  int K = 8, grid_points = 101;
  double level = 0.95;
  SamplerOpts sampler;
};

void emit_survival_outputs(const fs::path& dir, const ChainSet& cs, const Partition& part,
                           bool covariates, bool with_supplemental, int grid_points, double level,
                           double horizon) {
  const Eigen::VectorXd grid = make_grid(grid_points);
  std::vector<MedianRow> medians;

  const CovariateSetting baseline{Source::primary, 0, 0};
  write_curve_csv((dir / "survival_baseline.csv").string(),
                  survival_curve(cs, part, baseline, grid, level));
  medians.push_back({"baseline", median_survival(cs, part, baseline, horizon, level)});

  if (covariates) {
    const CovariateSetting onF{Source::primary, 1, 0};
    const CovariateSetting onI{Source::primary, 0, 1};
    write_curve_csv((dir / "survival_F.csv").string(), survival_curve(cs, part, onF, grid, level));
    write_curve_csv((dir / "survival_I.csv").string(), survival_curve(cs, part, onI, grid, level));
    medians.push_back({"F", median_survival(cs, part, onF, horizon, level)});
    medians.push_back({"I", median_survival(cs, part, onI, horizon, level)});
    write_hazard_ratio_csv((dir / "hazard_ratios.csv").string(),
                           {{"F", hazard_ratio_summary(cs, "F", level)},
                            {"I", hazard_ratio_summary(cs, "I", level)}});
  }
  if (with_supplemental) {
    const CovariateSetting suppl{Source::supplemental, 0, 0};
    write_curve_csv((dir / "survival_supplemental.csv").string(),
                    survival_curve(cs, part, suppl, grid, level));
    medians.push_back({"supplemental", median_survival(cs, part, suppl, horizon, level)});
  }
  write_median_csv((dir / "medians.csv").string(), medians);
}

void run_fit_survival(const FitSurvivalOpts& o) {
  RunManifest man;
  man.command = "fit-survival";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.data);
  man.set_config_sorted({{"K", std::to_string(o.K)},
                         {"spacing", o.spacing},
                         {"horizon", format_g17(o.horizon)},
                         {"grid_points", std::to_string(o.grid_points)},
                         {"level", format_g17(o.level)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const SurvivalDataset data = parse_survival_csv(o.data, o.horizon);
  const Partition part = partition_from(o.K, o.spacing, data.time);
  const ChainSet cs = fit_pwe_conventional(data, part, o.sampler.to_config());
  report_warnings(cs);

  const fs::path dir = prepare_out(o.out);
  write_bundle(dir, cs);
  emit_survival_outputs(dir, cs, part, data.has_covariates, false, o.grid_points, o.level, o.horizon);
  finish(man, dir);
}

struct FitSurvivalGmcOpts {
  std::string primary, supplemental, out, spacing = "equal";
  double horizon = 730.0;
  int K = 8, grid_points = 101;
  double level = 0.95;
  double R_gamma = 10000.0;
  std::vector<double> nu_prior = {0.10, 0.90};
  SamplerOpts sampler;
};

void run_fit_survival_gmc(const FitSurvivalGmcOpts& o) {
  check_pair(o.nu_prior, "nu_prior");
  RunManifest man;
  man.command = "fit-survival-gmc";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.primary);
  man.add_input(o.supplemental);
  man.set_config_sorted({{"K", std::to_string(o.K)},
                         {"spacing", o.spacing},
                         {"horizon", format_g17(o.horizon)},
                         {"grid_points", std::to_string(o.grid_points)},
                         {"level", format_g17(o.level)},
                         {"R_gamma", format_g17(o.R_gamma)},
                         {"nu_prior", join_doubles(o.nu_prior)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const SurvivalDataset primary = parse_survival_csv(o.primary, o.horizon);
  const SurvivalDataset suppl = parse_survival_csv(o.supplemental, o.horizon);

  Eigen::VectorXd all_t(primary.n() + suppl.n());
  all_t << primary.time, suppl.time;
  const Partition part = partition_from(o.K, o.spacing, all_t);

  const GmcHyper hyper{o.R_gamma, o.nu_prior[0], o.nu_prior[1]};
  const ChainSet cs = fit_pwe_gmc(primary, suppl, hyper, part, o.sampler.to_config());
  report_warnings(cs);

  const fs::path dir = prepare_out(o.out);
  write_bundle(dir, cs);
  emit_survival_outputs(dir, cs, part, primary.has_covariates, true, o.grid_points, o.level, o.horizon);
  finish(man, dir);
}

struct SelectPartitionOpts {
  std::string data, out, candidates;
  double horizon = 730.0;
  SamplerOpts sampler;
};

std::vector<PartitionCandidate> parse_candidates(const std::string& text, const Eigen::VectorXd& times) {
  std::vector<PartitionCandidate> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find(',', start);
    if (pos == std::string::npos) pos = text.size();
    const std::string token = text.substr(start, pos - start);
    start = pos + 1;
    if (token.empty()) continue;
    const std::size_t colon = token.find(':');
    if (colon == std::string::npos)
      throw ConfigError("candidate '" + token + "' must look like K:spacing, e.g. 8:equal");
    int K = 0;
    try {
      K = std::stoi(token.substr(0, colon));
    } catch (const std::exception&) {
      throw ConfigError("candidate '" + token + "' has a non-numeric K");
    }
    const std::string spacing = token.substr(colon + 1);
    PartitionCandidate c;
    c.label = token;
    c.K = K;
    c.spacing = spacing;
    c.partition = partition_from(K, spacing, times);
    out.push_back(std::move(c));
  }
  if (out.empty()) throw ConfigError("no partition candidates given");
  return out;
}

void run_select_partition(const SelectPartitionOpts& o) {
  RunManifest man;
  man.command = "select-partition";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.add_input(o.data);
  man.set_config_sorted({{"candidates", o.candidates},
                         {"horizon", format_g17(o.horizon)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  const SurvivalDataset data = parse_survival_csv(o.data, o.horizon);
  const auto candidates = parse_candidates(o.candidates, data.time);
  const auto report = select_partition_dic(data, candidates, o.sampler.to_config());

  const fs::path dir = prepare_out(o.out);
  write_partition_report_csv((dir / "partition_report.csv").string(), report);
  finish(man, dir);
}

struct KmOpts {
  std::string data, out;
  double horizon = 730.0;
};

void run_km(const KmOpts& o) {
  RunManifest man;
  man.command = "km";
  man.version = kVersion;
  man.seed = 0;
  man.started = utc_timestamp();
  man.add_input(o.data);
  man.set_config_sorted({{"horizon", format_g17(o.horizon)}});

  const SurvivalDataset data = parse_survival_csv(o.data, o.horizon);
  const KaplanMeier km = kaplan_meier(data);

  const fs::path dir = prepare_out(o.out);
  write_km_csv((dir / "km.csv").string(), km, o.horizon);
  finish(man, dir);
}

struct SimulateOpts {
  std::string out, mode = "uniform";
  int M = 200, N = 50, N0 = 50, K = 10;
  double sigma = 1.0, sigma0 = 1.0;
  std::vector<double> d_grid = {0.0, 0.05, 0.10, 0.20, 0.35, 0.50, 0.75, 1.0, 1.50, 2.0, 3.0, 4.0, 5.0};
  double R = 2000.0, p0 = 0.5, slab_lower = 0.0, slab_upper = 2.0;
  std::vector<double> nu_prior = {0.5, 0.5};
  SamplerOpts sampler;
};

void run_simulate(const SimulateOpts& o) {
  check_pair(o.nu_prior, "nu_prior");
  RunManifest man;
  man.command = "simulate";
  man.version = kVersion;
  man.seed = o.sampler.seed;
  man.started = utc_timestamp();
  man.set_config_sorted({{"M", std::to_string(o.M)},
                         {"N", std::to_string(o.N)},
                         {"N0", std::to_string(o.N0)},
                         {"K", std::to_string(o.K)},
                         {"sigma", format_g17(o.sigma)},
                         {"sigma0", format_g17(o.sigma0)},
                         {"d_grid", join_doubles(o.d_grid)},
                         {"mode", o.mode},
                         {"R", format_g17(o.R)},
                         {"p0", format_g17(o.p0)},
                         {"slab_lower", format_g17(o.slab_lower)},
                         {"slab_upper", format_g17(o.slab_upper)},
                         {"nu_prior", join_doubles(o.nu_prior)},
                         {"chains", std::to_string(o.sampler.chains)},
                         {"burn_in", std::to_string(o.sampler.burn_in)},
                         {"iterations", std::to_string(o.sampler.iterations)},
                         {"thin", std::to_string(o.sampler.thin)}});

  SimConfig cfg;
  cfg.d_grid = o.d_grid;
  cfg.N = o.N;
  cfg.N0 = o.N0;
  cfg.sigma = o.sigma;
  cfg.sigma0 = o.sigma0;
  cfg.M = o.M;
  cfg.seed = o.sampler.seed;
  if (o.mode == "uniform") cfg.mode = SimConfig::Mode::uniform;
  else if (o.mode == "stratified") cfg.mode = SimConfig::Mode::stratified;
  else throw ConfigError("mode must be uniform or stratified, got '" + o.mode + "'");
  cfg.K = o.K;
  cfg.sampler = o.sampler.to_config();
  cfg.curve_hyper = GmcHyper{o.R, o.nu_prior[0], o.nu_prior[1]};
  cfg.intercept_hyper = CommensurateHyper{o.slab_lower, o.slab_upper, o.R, o.p0};

  const StudyResult res = run_study(cfg);
  for (const auto& f : res.failures)
    std::cerr << "warning: replicate " << f.replicate << " (seed " << f.seed << ") failed: " << f.reason
              << '\n';
  if (res.records.empty()) throw ModelError("every replicate failed");

  const fs::path dir = prepare_out(o.out);
  write_study_table_csv((dir / "study_table.csv").string(), res.table);
  write_study_records_csv((dir / "study_records.csv").string(), res.records);
  write_study_failures_csv((dir / "study_failures.csv").string(), res.failures);
  finish(man, dir);
}

struct SummarizeOpts {
  std::string draws, out;
  std::vector<double> probs = kSummaryProbs;
};

void run_summarize(const SummarizeOpts& o) {
  RunManifest man;
  man.command = "summarize";
  man.version = kVersion;
  man.seed = 0;
  man.started = utc_timestamp();
  man.add_input(o.draws);
  man.set_config_sorted({{"probs", join_doubles(o.probs)}});

  const ChainSet cs = read_draws_csv(o.draws);
  const auto rows = summarize(cs, o.probs);

  const fs::path dir = prepare_out(o.out);
  write_summary_csv((dir / "summary.csv").string(), rows, o.probs);
  finish(man, dir);
}

}  // namespace

int cli_dispatch(std::vector<std::string> args) {
  CLI::App app{"Bayesian curve and survival fitting with selective borrowing from a supplemental source"};
  app.require_subcommand(1);

  FitRegressionOpts reg;
  auto* s_reg = app.add_subcommand("fit-regression", "penalized-spline regression of one source");
  s_reg->set_config("--config");
  s_reg->add_option("--data", reg.data, "input csv: y,t,source")->required();
  s_reg->add_flag("--rescale", reg.rescale, "map raw times onto [0,1]");
  s_reg->add_option("--K", reg.K, "intervals in the knot partition")->capture_default_str();
  s_reg->add_option("--spacing", reg.spacing, "equal or quantile")->capture_default_str();
  s_reg->add_option("--grid_points,--grid-points", reg.grid_points, "curve grid resolution")
      ->capture_default_str();
  s_reg->add_option("--level", reg.level, "credible level for curve bands")->capture_default_str();
  add_sampler_options(s_reg, reg.sampler, 1000, 5000);
  s_reg->add_option("--out", reg.out, "output directory")->required();
  s_reg->callback([&reg] { run_fit_regression(reg); });

  FitRegressionGmcOpts rgm;
  auto* s_rgm = app.add_subcommand("fit-regression-gmc",
                                   "two-source regression with selective borrowing of curve features");
  s_rgm->set_config("--config");
  s_rgm->add_option("--primary", rgm.primary, "primary-source csv")->required();
  s_rgm->add_option("--supplemental", rgm.supplemental, "supplemental-source csv")->required();
  s_rgm->add_flag("--rescale", rgm.rescale, "map raw times onto [0,1]");
  s_rgm->add_option("--K", rgm.K, "intervals in the knot partition")->capture_default_str();
  s_rgm->add_option("--spacing", rgm.spacing, "equal or quantile")->capture_default_str();
  s_rgm->add_option("--R", rgm.R, "spike precision tying primary to supplemental coefficients")
      ->capture_default_str();
  s_rgm->add_option("--p0", rgm.p0, "prior borrowing probability for the intercept")->capture_default_str();
  s_rgm->add_option("--slab_lower,--slab-lower", rgm.slab_lower, "intercept slab precision lower bound")
      ->capture_default_str();
  s_rgm->add_option("--slab_upper,--slab-upper", rgm.slab_upper, "intercept slab precision upper bound")
      ->capture_default_str();
  s_rgm->add_option("--nu_prior,--nu-prior", rgm.nu_prior, "beta prior a1,a2 on the shared borrowing weight")
      ->delimiter(',')
      ->expected(1, 2)
      ->capture_default_str();
  s_rgm->add_option("--grid_points,--grid-points", rgm.grid_points, "curve grid resolution")
      ->capture_default_str();
  s_rgm->add_option("--level", rgm.level, "credible level for curve bands")->capture_default_str();
  add_sampler_options(s_rgm, rgm.sampler, 1000, 5000);
  s_rgm->add_option("--out", rgm.out, "output directory")->required();
  s_rgm->callback([&rgm] { run_fit_regression_gmc(rgm); });

  FitCtpOpts ctp;
  auto* s_ctp = app.add_subcommand("fit-ctp", "paired-tissue hierarchical regression with cross-tissue borrowing");
  s_ctp->set_config("--config");
  s_ctp->add_option("--data", ctp.data, "input csv: y,t,source,individual,region,tissue")->required();
  s_ctp->add_flag("--rescale", ctp.rescale, "map raw times onto [0,1]");
  s_ctp->add_option("--K", ctp.K, "intervals in the knot partition")->capture_default_str();
  s_ctp->add_option("--spacing", ctp.spacing, "equal or quantile")->capture_default_str();
  s_ctp->add_option("--R", ctp.R, "spike precision tying cancerous to noncancerous coefficients")
      ->capture_default_str();
  s_ctp->add_option("--p0", ctp.p0, "prior borrowing probability for the intercept")->capture_default_str();
  s_ctp->add_option("--slab_lower,--slab-lower", ctp.slab_lower, "intercept slab precision lower bound")
      ->capture_default_str();
  s_ctp->add_option("--slab_upper,--slab-upper", ctp.slab_upper, "intercept slab precision upper bound")
      ->capture_default_str();
  s_ctp->add_option("--nu_prior,--nu-prior", ctp.nu_prior, "beta prior a1,a2 on the shared borrowing weight")
      ->delimiter(',')
      ->expected(1, 2)
      ->capture_default_str();
  s_ctp->add_option("--grid_points,--grid-points", ctp.grid_points, "curve grid resolution")
      ->capture_default_str();
  s_ctp->add_option("--level", ctp.level, "credible level for curve bands")->capture_default_str();
  add_sampler_options(s_ctp, ctp.sampler, 1000, 5000);
  s_ctp->add_option("--out", ctp.out, "output directory")->required();
  s_ctp->callback([&ctp] { run_fit_ctp(ctp); });

  FitSurvivalOpts sur;
  auto* s_sur = app.add_subcommand("fit-survival", "piecewise-constant-hazard survival fit");
  s_sur->set_config("--config");
  s_sur->add_option("--data", sur.data, "input csv: time_days,event,source[,z_F,z_I]")->required();
  s_sur->add_option("--horizon", sur.horizon, "administrative censoring horizon in days")
      ->capture_default_str();
  s_sur->add_option("--K", sur.K, "intervals in the hazard partition")->capture_default_str();
  s_sur->add_option("--spacing", sur.spacing, "equal or quantile")->capture_default_str();
  s_sur->add_option("--grid_points,--grid-points", sur.grid_points, "survival grid resolution")
      ->capture_default_str();
  s_sur->add_option("--level", sur.level, "credible level")->capture_default_str();
  add_sampler_options(s_sur, sur.sampler, 2000, 10000);
  s_sur->add_option("--out", sur.out, "output directory")->required();
  s_sur->callback([&sur] { run_fit_survival(sur); });

  FitSurvivalGmcOpts sgm;
  auto* s_sgm = app.add_subcommand("fit-survival-gmc",
                                   "two-source piecewise-constant-hazard fit with selective borrowing");
  s_sgm->set_config("--config");
  s_sgm->add_option("--primary", sgm.primary, "primary-source csv")->required();
  s_sgm->add_option("--supplemental", sgm.supplemental, "supplemental-source csv")->required();
  s_sgm->add_option("--horizon", sgm.horizon, "administrative censoring horizon in days")
      ->capture_default_str();
  s_sgm->add_option("--K", sgm.K, "intervals in the hazard partition")->capture_default_str();
  s_sgm->add_option("--spacing", sgm.spacing, "equal or quantile")->capture_default_str();
  s_sgm->add_option("--R_gamma,--R-gamma", sgm.R_gamma, "spike precision tying the two log-hazard curves")
      ->capture_default_str();
  s_sgm->add_option("--nu_prior,--nu-prior", sgm.nu_prior, "beta prior a1,a2 on the shared borrowing weight")
      ->delimiter(',')
      ->expected(1, 2)
      ->capture_default_str();
  s_sgm->add_option("--grid_points,--grid-points", sgm.grid_points, "survival grid resolution")
      ->capture_default_str();
  s_sgm->add_option("--level", sgm.level, "credible level")->capture_default_str();
  add_sampler_options(s_sgm, sgm.sampler, 2000, 10000);
  s_sgm->add_option("--out", sgm.out, "output directory")->required();
  s_sgm->callback([&sgm] { run_fit_survival_gmc(sgm); });

  SelectPartitionOpts sel;
  auto* s_sel = app.add_subcommand("select-partition", "rank candidate hazard partitions by DIC");
  s_sel->set_config("--config");
  s_sel->add_option("--data", sel.data, "input csv: time_days,event,source[,z_F,z_I]")->required();
  s_sel->add_option("--candidates", sel.candidates, "comma list of K:spacing, e.g. 4:equal,8:equal,12:quantile")
      ->required();
  s_sel->add_option("--horizon", sel.horizon, "administrative censoring horizon in days")
      ->capture_default_str();
  add_sampler_options(s_sel, sel.sampler, 2000, 10000);
  s_sel->add_option("--out", sel.out, "output directory")->required();
  s_sel->callback([&sel] { run_select_partition(sel); });

  KmOpts km;
  auto* s_km = app.add_subcommand("km", "product-limit survival estimate");
  s_km->set_config("--config");
  s_km->add_option("--data", km.data, "input csv: time_days,event,source[,z_F,z_I]")->required();
  s_km->add_option("--horizon", km.horizon, "administrative censoring horizon in days")
      ->capture_default_str();
  s_km->add_option("--out", km.out, "output directory")->required();
  s_km->callback([&km] { run_km(km); });

  SimulateOpts sim;
  auto* s_sim = app.add_subcommand("simulate", "operating-characteristics study of the three estimators");
  s_sim->set_config("--config");
  s_sim->add_option("--M", sim.M, "replicates")->capture_default_str();
  s_sim->add_option("--N", sim.N, "primary observations per replicate")->capture_default_str();
  s_sim->add_option("--N0", sim.N0, "supplemental observations per replicate")->capture_default_str();
  s_sim->add_option("--sigma", sim.sigma, "primary noise sd")->capture_default_str();
  s_sim->add_option("--sigma0", sim.sigma0, "supplemental noise sd")->capture_default_str();
  s_sim->add_option("--d_grid,--d-grid", sim.d_grid, "comma list of discordance values")
      ->delimiter(',')
      ->expected(1, 1000)
      ->capture_default_str();
  s_sim->add_option("--mode", sim.mode, "uniform or stratified assignment of d")->capture_default_str();
  s_sim->add_option("--K", sim.K, "intervals in the knot partition")->capture_default_str();
  s_sim->add_option("--R", sim.R, "spike precision")->capture_default_str();
  s_sim->add_option("--p0", sim.p0, "prior borrowing probability for the intercept")->capture_default_str();
  s_sim->add_option("--slab_lower,--slab-lower", sim.slab_lower, "intercept slab precision lower bound")
      ->capture_default_str();
  s_sim->add_option("--slab_upper,--slab-upper", sim.slab_upper, "intercept slab precision upper bound")
      ->capture_default_str();
  s_sim->add_option("--nu_prior,--nu-prior", sim.nu_prior, "beta prior a1,a2 on the shared borrowing weight")
      ->delimiter(',')
      ->expected(1, 2)
      ->capture_default_str();
  add_sampler_options(s_sim, sim.sampler, 1000, 5000);
  s_sim->add_option("--out", sim.out, "output directory")->required();
  s_sim->callback([&sim] { run_simulate(sim); });

  SummarizeOpts sum;
  auto* s_sum = app.add_subcommand("summarize", "recompute the posterior summary from a draws file");
  s_sum->set_config("--config");
  s_sum->add_option("--draws", sum.draws, "draws csv emitted by a fit")->required();
  s_sum->add_option("--probs", sum.probs, "comma list of quantile probabilities")
      ->delimiter(',')
      ->expected(1, 100)
      ->capture_default_str();
  s_sum->add_option("--out", sum.out, "output directory")->required();
  s_sum->callback([&sum] { run_summarize(sum); });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace gmc

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gmcborrow/csv.hpp"
#include "gmcborrow/cli.hpp"
#include "gmcborrow/engine.hpp"
#include "gmcborrow/errors.hpp"
#include "gmcborrow/manifest.hpp"
#include "gmcborrow/regression.hpp"
#include "gmcborrow/rng.hpp"
#include "gmcborrow/simulate.hpp"
#include "gmcborrow/spline.hpp"
#include "gmcborrow/survival.hpp"
#include "gmcborrow/version.hpp"

namespace py = pybind11;
using namespace gmc;

namespace {

KnotSpacing spacing_from(const std::string& s) {
  if (s == "equal") return KnotSpacing::equal;
  if (s == "quantile") return KnotSpacing::quantile;
  throw ConfigError("spacing must be equal or quantile, got '" + s + "'");
}

Source source_from(const std::string& s) {
  if (s == "primary") return Source::primary;
  if (s == "supplemental") return Source::supplemental;
  throw ConfigError("source must be primary or supplemental, got '" + s + "'");
}

std::string source_str(Source s) { return s == Source::primary ? "primary" : "supplemental"; }

Tissue tissue_from(const std::string& s) {
  if (s == "cancerous") return Tissue::cancerous;
  if (s == "noncancerous") return Tissue::noncancerous;
  throw ConfigError("tissue must be cancerous or noncancerous, got '" + s + "'");
}

ForceIndicators force_from(const std::string& s) {
  if (s == "none") return ForceIndicators::none;
  if (s == "all_zero") return ForceIndicators::all_zero;
  if (s == "all_one") return ForceIndicators::all_one;
  throw ConfigError("force_indicators must be none, all_zero, or all_one");
}

CurveSelector selector_from(const std::string& curve, const std::string& tissue, int individual) {
  if (curve == "primary") return CurveSelector::primary();
  if (curve == "supplemental") return CurveSelector::supplemental();
  if (curve == "cancerous") return CurveSelector::cancerous();
  if (curve == "noncancerous") return CurveSelector::noncancerous();
  if (curve == "deviation") return CurveSelector::deviation(tissue_from(tissue), individual);
  throw UnknownCurve("curve must be primary, supplemental, cancerous, noncancerous, or deviation");
}

}  // namespace

PYBIND11_MODULE(_gmcborrow, m) {
  m.doc() = "Bayesian curve and survival fitting with selective borrowing from a supplemental source";
  m.attr("__version__") = kVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  py::class_<Partition>(m, "Partition")
      .def(py::init<>())
      .def_readwrite("knots", &Partition::knots)
      .def("intervals", &Partition::intervals);

  m.def(
      "build_partition",
      [](int K, const std::string& spacing, const Eigen::VectorXd& t) {
        return build_partition(K, spacing_from(spacing), t);
      },
      py::arg("K"), py::arg("spacing") = "equal", py::arg("t") = Eigen::VectorXd());

  m.def("eval_basis", &eval_basis, py::arg("t"), py::arg("partition"));
  m.def("design_matrix", &design_matrix, py::arg("t"), py::arg("partition"));
  m.def("quantile_type7", &quantile_type7, py::arg("values"), py::arg("p"));

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("chains", &SamplerConfig::chains)
      .def_readwrite("burn_in", &SamplerConfig::burn_in)
      .def_readwrite("iterations", &SamplerConfig::iterations)
      .def_readwrite("thin", &SamplerConfig::thin)
      .def_readwrite("seed", &SamplerConfig::seed);

  py::class_<GmcHyper>(m, "GmcHyper")
      .def(py::init<>())
      .def(py::init([](double R, double a1, double a2) { return GmcHyper{R, a1, a2}; }), py::arg("R"),
           py::arg("a1"), py::arg("a2"))
      .def_readwrite("R", &GmcHyper::R)
      .def_readwrite("a1", &GmcHyper::a1)
      .def_readwrite("a2", &GmcHyper::a2);

  py::class_<CommensurateHyper>(m, "CommensurateHyper")
      .def(py::init<>())
      .def(py::init([](double s_l, double s_u, double R, double p0) {
             return CommensurateHyper{s_l, s_u, R, p0};
           }),
           py::arg("s_l"), py::arg("s_u"), py::arg("R"), py::arg("p0"))
      .def_readwrite("s_l", &CommensurateHyper::s_l)
      .def_readwrite("s_u", &CommensurateHyper::s_u)
      .def_readwrite("R", &CommensurateHyper::R)
      .def_readwrite("p0", &CommensurateHyper::p0);

  py::class_<RegressionDataset>(m, "RegressionDataset")
      .def(py::init<>())
      .def_readwrite("y", &RegressionDataset::y)
      .def_readwrite("t", &RegressionDataset::t)
      .def_property(
          "source", [](const RegressionDataset& d) { return source_str(d.source); },
          [](RegressionDataset& d, const std::string& s) { d.source = source_from(s); })
      .def_readwrite("has_hierarchy", &RegressionDataset::has_hierarchy)
      .def_readwrite("individual", &RegressionDataset::individual)
      .def_readwrite("region", &RegressionDataset::region)
      .def_property(
          "tissue",
          [](const RegressionDataset& d) {
            std::vector<std::string> out;
            out.reserve(d.tissue.size());
            for (Tissue t : d.tissue)
              out.push_back(t == Tissue::cancerous ? "cancerous" : "noncancerous");
            return out;
          },
          [](RegressionDataset& d, const std::vector<std::string>& v) {
            d.tissue.clear();
            d.tissue.reserve(v.size());
            for (const auto& s : v) d.tissue.push_back(tissue_from(s));
          })
      .def("n", &RegressionDataset::n)
      .def("validate", &RegressionDataset::validate);

  py::class_<GmcRegressionSpec>(m, "GmcRegressionSpec")
      .def(py::init<>())
      .def_readwrite("partition", &GmcRegressionSpec::partition)
      .def_readwrite("curve_hyper", &GmcRegressionSpec::curve_hyper)
      .def_readwrite("intercept_hyper", &GmcRegressionSpec::intercept_hyper)
      .def_property(
          "force_indicators",
          [](const GmcRegressionSpec& s) {
            switch (s.force_indicators) {
              case ForceIndicators::all_zero: return "all_zero";
              case ForceIndicators::all_one: return "all_one";
              default: return "none";
            }
          },
          [](GmcRegressionSpec& s, const std::string& v) { s.force_indicators = force_from(v); });

  py::class_<ChainSet>(m, "ChainSet")
      .def(py::init<>())
      .def_readonly("names", &ChainSet::names)
      .def_readonly("draws", &ChainSet::draws)
      .def_readonly("deviance", &ChainSet::deviance)
      .def_readonly("accept_rates", &ChainSet::accept_rates)
      .def_readonly("warnings", &ChainSet::warnings)
      .def("n_chains", &ChainSet::n_chains)
      .def("n_stored", &ChainSet::n_stored)
      .def("n_params", &ChainSet::n_params)
      .def("index_of", &ChainSet::index_of)
      .def("pooled", &ChainSet::pooled)
      .def("pooled_deviance", &ChainSet::pooled_deviance)
      .def("posterior_mean", &ChainSet::posterior_mean);

  py::class_<SummaryRow>(m, "SummaryRow")
      .def_readonly("name", &SummaryRow::name)
      .def_readonly("mean", &SummaryRow::mean)
      .def_readonly("sd", &SummaryRow::sd)
      .def_readonly("quantiles", &SummaryRow::quantiles);

  py::class_<Diagnostics>(m, "Diagnostics")
      .def_readonly("rhat", &Diagnostics::rhat)
      .def_readonly("ess", &Diagnostics::ess)
      .def_readonly("accept_rates", &Diagnostics::accept_rates);

  py::class_<DicResult>(m, "DicResult")
      .def_readonly("dbar", &DicResult::dbar)
      .def_readonly("pd", &DicResult::pd)
      .def_readonly("dic", &DicResult::dic)
      .def_readonly("negative_pd", &DicResult::negative_pd);

  m.def("summarize", &summarize, py::arg("chains"),
        py::arg("probabilities") = std::vector<double>{0.025, 0.5, 0.975});
  m.def("diagnostics", &diagnostics, py::arg("chains"));
  m.def("compute_dic", &compute_dic, py::arg("deviance_draws"), py::arg("deviance_at_mean"));

  py::class_<CurveSummary>(m, "CurveSummary")
      .def_readonly("grid", &CurveSummary::grid)
      .def_readonly("mean", &CurveSummary::mean)
      .def_readonly("lower", &CurveSummary::lower)
      .def_readonly("upper", &CurveSummary::upper)
      .def_readonly("level", &CurveSummary::level);

  m.def("fit_regression_conventional", &fit_regression_conventional, py::arg("data"), py::arg("partition"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("fit_regression_gmc", &fit_regression_gmc, py::arg("primary"), py::arg("supplemental"),
        py::arg("spec"), py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("fit_ctp_gmc", &fit_ctp_gmc, py::arg("data"), py::arg("spec"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "predict_curve",
      [](const ChainSet& cs, const Partition& p, const Eigen::VectorXd& grid, double level,
         const std::string& curve, const std::string& tissue, int individual) {
        return predict_curve(cs, p, selector_from(curve, tissue, individual), grid, level);
      },
      py::arg("chains"), py::arg("partition"), py::arg("grid"), py::arg("level") = 0.95,
      py::arg("curve") = "primary", py::arg("tissue") = "cancerous", py::arg("individual") = 0);
  m.def(
      "predict_derivative",
      [](const ChainSet& cs, const Partition& p, const Eigen::VectorXd& grid, double level,
         const std::string& curve, const std::string& tissue, int individual) {
        return predict_derivative(cs, p, selector_from(curve, tissue, individual), grid, level);
      },
      py::arg("chains"), py::arg("partition"), py::arg("grid"), py::arg("level") = 0.95,
      py::arg("curve") = "primary", py::arg("tissue") = "cancerous", py::arg("individual") = 0);

  py::class_<SurvivalDataset>(m, "SurvivalDataset")
      .def(py::init<>())
      .def_readwrite("time", &SurvivalDataset::time)
      .def_readwrite("event", &SurvivalDataset::event)
      .def_readwrite("has_covariates", &SurvivalDataset::has_covariates)
      .def_readwrite("zF", &SurvivalDataset::zF)
      .def_readwrite("zI", &SurvivalDataset::zI)
      .def_property(
          "source", [](const SurvivalDataset& d) { return source_str(d.source); },
          [](SurvivalDataset& d, const std::string& s) { d.source = source_from(s); })
      .def("n", &SurvivalDataset::n)
      .def("n_events", &SurvivalDataset::n_events)
      .def("validate", &SurvivalDataset::validate);

  py::class_<PweParams>(m, "PweParams")
      .def(py::init<>())
      .def_readwrite("gamma", &PweParams::gamma)
      .def_readwrite("rho", &PweParams::rho);

  m.def("rescale_time", &rescale_time, py::arg("days"), py::arg("horizon"));
  m.def("pwe_loglik", &pwe_loglik, py::arg("params"), py::arg("data"), py::arg("partition"));
  m.def("fit_pwe_conventional", &fit_pwe_conventional, py::arg("data"), py::arg("partition"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "fit_pwe_gmc",
      [](const SurvivalDataset& primary, const SurvivalDataset& suppl, const GmcHyper& hyper,
         const Partition& p, const SamplerConfig& config, const std::string& force) {
        ForceIndicators fi = force_from(force);
        py::gil_scoped_release release;
        return fit_pwe_gmc(primary, suppl, hyper, p, config, fi);
      },
      py::arg("primary"), py::arg("supplemental"), py::arg("hyper"), py::arg("partition"),
      py::arg("config"), py::arg("force_indicators") = "none");

  m.def(
      "survival_curve",
      [](const ChainSet& cs, const Partition& p, const Eigen::VectorXd& grid, double level,
         const std::string& source, int zF, int zI) {
        return survival_curve(cs, p, CovariateSetting{source_from(source), zF, zI}, grid, level);
      },
      py::arg("chains"), py::arg("partition"), py::arg("grid"), py::arg("level") = 0.95,
      py::arg("source") = "primary", py::arg("zF") = 0, py::arg("zI") = 0);

  py::class_<MedianSummary>(m, "MedianSummary")
      .def_readonly("mean_days", &MedianSummary::mean_days)
      .def_readonly("lower_days", &MedianSummary::lower_days)
      .def_readonly("upper_days", &MedianSummary::upper_days)
      .def_readonly("excluded", &MedianSummary::excluded)
      .def_readonly("total", &MedianSummary::total)
      .def_readonly("censored_at_horizon", &MedianSummary::censored_at_horizon);

  m.def(
      "median_survival",
      [](const ChainSet& cs, const Partition& p, double horizon_days, double level,
         const std::string& source, int zF, int zI) {
        return median_survival(cs, p, CovariateSetting{source_from(source), zF, zI}, horizon_days, level);
      },
      py::arg("chains"), py::arg("partition"), py::arg("horizon_days") = 730.0, py::arg("level") = 0.95,
      py::arg("source") = "primary", py::arg("zF") = 0, py::arg("zI") = 0);

  py::class_<HazardRatioSummary>(m, "HazardRatioSummary")
      .def_readonly("mean", &HazardRatioSummary::mean)
      .def_readonly("lower", &HazardRatioSummary::lower)
      .def_readonly("upper", &HazardRatioSummary::upper);

  m.def("hazard_ratio_summary", &hazard_ratio_summary, py::arg("chains"), py::arg("treatment"),
        py::arg("level") = 0.95);

  py::class_<KaplanMeier>(m, "KaplanMeier")
      .def_readonly("time", &KaplanMeier::time)
      .def_readonly("survival", &KaplanMeier::survival)
      .def_readonly("at_risk", &KaplanMeier::at_risk)
      .def_readonly("events", &KaplanMeier::events);

  m.def("kaplan_meier", &kaplan_meier, py::arg("data"));

  py::class_<PartitionReport>(m, "PartitionReport")
      .def_readonly("label", &PartitionReport::label)
      .def_readonly("K", &PartitionReport::K)
      .def_readonly("spacing", &PartitionReport::spacing)
      .def_readonly("dbar", &PartitionReport::dbar)
      .def_readonly("pd", &PartitionReport::pd)
      .def_readonly("dic", &PartitionReport::dic);

  m.def(
      "select_partition_dic",
      [](const SurvivalDataset& data, const std::vector<std::pair<int, std::string>>& candidates,
         const SamplerConfig& config) {
        std::vector<PartitionCandidate> cands;
        for (const auto& [K, spacing] : candidates) {
          PartitionCandidate c;
          c.label = std::to_string(K) + ":" + spacing;
          c.K = K;
          c.spacing = spacing;
          c.partition = build_partition(K, spacing_from(spacing), data.time);
          cands.push_back(std::move(c));
        }
        py::gil_scoped_release release;
        return select_partition_dic(data, cands, config);
      },
      py::arg("data"), py::arg("candidates"), py::arg("config"));

  py::class_<SimConfig> sim(m, "SimConfig");
  sim.def(py::init<>())
      .def_readwrite("d_grid", &SimConfig::d_grid)
      .def_readwrite("N", &SimConfig::N)
      .def_readwrite("N0", &SimConfig::N0)
      .def_readwrite("sigma", &SimConfig::sigma)
      .def_readwrite("sigma0", &SimConfig::sigma0)
      .def_readwrite("M", &SimConfig::M)
      .def_readwrite("seed", &SimConfig::seed)
      .def_property(
          "mode",
          [](const SimConfig& c) { return c.mode == SimConfig::Mode::stratified ? "stratified" : "uniform"; },
          [](SimConfig& c, const std::string& v) {
            if (v == "uniform") c.mode = SimConfig::Mode::uniform;
            else if (v == "stratified") c.mode = SimConfig::Mode::stratified;
            else throw ConfigError("mode must be uniform or stratified");
          })
      .def_readwrite("K", &SimConfig::K)
      .def_readwrite("sampler", &SimConfig::sampler)
      .def_readwrite("curve_hyper", &SimConfig::curve_hyper)
      .def_readwrite("intercept_hyper", &SimConfig::intercept_hyper);

  py::class_<Criteria>(m, "Criteria")
      .def_readonly("me", &Criteria::me)
      .def_readonly("rmse", &Criteria::rmse)
      .def_readonly("criw", &Criteria::criw)
      .def_readonly("cp", &Criteria::cp);

  py::class_<CriteriaRecord>(m, "CriteriaRecord")
      .def_readonly("replicate", &CriteriaRecord::replicate)
      .def_readonly("seed", &CriteriaRecord::seed)
      .def_readonly("d", &CriteriaRecord::d)
      .def_property_readonly("estimator",
                             [](const CriteriaRecord& r) { return estimator_name(r.estimator); })
      .def_readonly("criteria", &CriteriaRecord::criteria);

  py::class_<FailedReplicate>(m, "FailedReplicate")
      .def_readonly("replicate", &FailedReplicate::replicate)
      .def_readonly("seed", &FailedReplicate::seed)
      .def_readonly("d", &FailedReplicate::d)
      .def_readonly("reason", &FailedReplicate::reason);

  py::class_<StudyRow>(m, "StudyRow")
      .def_readonly("d", &StudyRow::d)
      .def_property_readonly("estimator", [](const StudyRow& r) { return estimator_name(r.estimator); })
      .def_readonly("count", &StudyRow::count)
      .def_readonly("me_mean", &StudyRow::me_mean)
      .def_readonly("me_se", &StudyRow::me_se)
      .def_readonly("rmse_mean", &StudyRow::rmse_mean)
      .def_readonly("rmse_se", &StudyRow::rmse_se)
      .def_readonly("criw_mean", &StudyRow::criw_mean)
      .def_readonly("criw_se", &StudyRow::criw_se)
      .def_readonly("cp_mean", &StudyRow::cp_mean)
      .def_readonly("cp_se", &StudyRow::cp_se);

  py::class_<StudyResult>(m, "StudyResult")
      .def_readonly("records", &StudyResult::records)
      .def_readonly("failures", &StudyResult::failures)
      .def_readonly("table", &StudyResult::table);

  m.def("true_mean", &true_mean, py::arg("t"), py::arg("d"));
  m.def("generate_pair", &generate_pair, py::arg("d"), py::arg("config"), py::arg("replicate_seed"));
  m.def("run_study", &run_study, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  m.def("parse_regression_csv", &parse_regression_csv, py::arg("path"), py::arg("rescale") = false);
  m.def("parse_survival_csv", &parse_survival_csv, py::arg("path"), py::arg("horizon_days") = 730.0);
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("index"));
  m.def("cli_dispatch", &cli_dispatch, py::arg("args"), py::call_guard<py::gil_scoped_release>());
}

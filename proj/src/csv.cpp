#include "gmcborrow/csv.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmcborrow/errors.hpp"

namespace gmc {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, int line, int field) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, field, "expected a number, got '" + s + "'");
  return v;
}

long parse_int(const std::string& s, int line, int field) {
  long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, field, "expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, int line, int field) {
  std::uint64_t v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, field, "expected an unsigned integer, got '" + s + "'");
  return v;
}

// Reads all lines, strips a trailing CR, drops blank lines past the header.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  return out;
}

}  // namespace

RegressionDataset parse_regression_csv(const std::string& path, bool rescale) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(1, 1, "empty file");
  const std::string header = lines[0];
  bool hierarchy = false;
  if (header == "y,t,source") {
    hierarchy = false;
  } else if (header == "y,t,source,individual,region,tissue") {
    hierarchy = true;
  } else {
    throw ParseError(1, 1, "header must be y,t,source or y,t,source,individual,region,tissue");
  }

  std::vector<double> y, t;
  std::vector<int> individual, region;
  std::vector<Tissue> tissue;
  Source src = Source::primary;
  bool src_set = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    const std::size_t want = hierarchy ? 6u : 3u;
    if (f.size() != want)
      throw ParseError(lineno, static_cast<int>(f.size()), "expected " + std::to_string(want) + " fields");
    y.push_back(parse_double(f[0], lineno, 1));
    const double ti = parse_double(f[1], lineno, 2);
    if (!rescale && (ti < 0.0 || ti > 1.0))
      throw RangeError("t = " + f[1] + " outside [0,1] at line " + std::to_string(lineno) +
                       "; pass rescale for raw times");
    t.push_back(ti);
    Source s;
    if (f[2] == "primary") s = Source::primary;
    else if (f[2] == "supplemental") s = Source::supplemental;
    else throw ParseError(lineno, 3, "source must be primary or supplemental, got '" + f[2] + "'");
    if (!src_set) {
      src = s;
      src_set = true;
    } else if (s != src) {
      throw ParseError(lineno, 3, "mixed sources in one file; split primary and supplemental files");
    }
    if (hierarchy) {
      individual.push_back(static_cast<int>(parse_int(f[3], lineno, 4)));
      region.push_back(static_cast<int>(parse_int(f[4], lineno, 5)));
      if (f[5] == "cancerous") tissue.push_back(Tissue::cancerous);
      else if (f[5] == "noncancerous") tissue.push_back(Tissue::noncancerous);
      else throw ParseError(lineno, 6, "tissue must be cancerous or noncancerous, got '" + f[5] + "'");
    }
  }
  if (y.empty()) throw ValidationError("no data rows in " + path);

  if (rescale) {
    double lo = t[0], hi = t[0];
    for (double v : t) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw ValidationError("cannot rescale: all times equal");
    for (double& v : t) v = (v - lo) / (hi - lo);
  }

  RegressionDataset ds;
  const int n = static_cast<int>(y.size());
  ds.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  ds.t = Eigen::Map<const Eigen::VectorXd>(t.data(), n);
  ds.source = src;
  ds.has_hierarchy = hierarchy;
  if (hierarchy) {
    ds.individual = std::move(individual);
    ds.region = std::move(region);
    ds.tissue = std::move(tissue);
  }
  ds.validate();
  return ds;
}

SurvivalDataset parse_survival_csv(const std::string& path, double horizon_days) {
  if (!(horizon_days > 0.0)) throw ValidationError("horizon must be positive");
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(1, 1, "empty file");
  const std::string header = lines[0];
  bool covariates = false;
  if (header == "time_days,event,source") {
    covariates = false;
  } else if (header == "time_days,event,source,z_F,z_I") {
    covariates = true;
  } else {
    throw ParseError(1, 1, "header must be time_days,event,source or time_days,event,source,z_F,z_I");
  }

  std::vector<double> days;
  std::vector<int> event, zF, zI;
  Source src = Source::primary;
  bool src_set = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    const std::size_t want = covariates ? 5u : 3u;
    if (f.size() != want)
      throw ParseError(lineno, static_cast<int>(f.size()), "expected " + std::to_string(want) + " fields");
    double d = parse_double(f[0], lineno, 1);
    if (!(d > 0.0)) throw NegativeTime("nonpositive time at line " + std::to_string(lineno));
    int e = static_cast<int>(parse_int(f[1], lineno, 2));
    if (e != 0 && e != 1) throw ParseError(lineno, 2, "event must be 0 or 1, got '" + f[1] + "'");
    Source s;
    if (f[2] == "primary") s = Source::primary;
    else if (f[2] == "supplemental") s = Source::supplemental;
    else throw ParseError(lineno, 3, "source must be primary or supplemental, got '" + f[2] + "'");
    if (!src_set) {
      src = s;
      src_set = true;
    } else if (s != src) {
      throw ParseError(lineno, 3, "mixed sources in one file; split primary and supplemental files");
    }
    if (d > horizon_days) {  // administrative censoring at the horizon
      d = horizon_days;
      e = 0;
    }
    days.push_back(d);
    event.push_back(e);
    if (covariates) {
      const int vF = static_cast<int>(parse_int(f[3], lineno, 4));
      const int vI = static_cast<int>(parse_int(f[4], lineno, 5));
      if ((vF != 0 && vF != 1) || (vI != 0 && vI != 1))
        throw ParseError(lineno, vF != 0 && vF != 1 ? 4 : 5, "treatment indicators must be 0 or 1");
      zF.push_back(vF);
      zI.push_back(vI);
    }
  }
  if (days.empty()) throw ValidationError("no data rows in " + path);

  SurvivalDataset ds;
  const int n = static_cast<int>(days.size());
  ds.time = rescale_time(Eigen::Map<const Eigen::VectorXd>(days.data(), n), horizon_days);
  ds.event = std::move(event);
  ds.has_covariates = covariates;
  if (covariates) {
    ds.zF = std::move(zF);
    ds.zI = std::move(zI);
  }
  ds.source = src;
  ds.validate();
  return ds;
}

void write_draws_csv(const std::string& path, const ChainSet& cs) {
  auto out = open_out(path);
  out << "chain,iteration,deviance";
  for (const auto& name : cs.names) out << ',' << name;
  out << '\n';
  for (int c = 0; c < cs.n_chains(); ++c) {
    for (int i = 0; i < cs.n_stored(); ++i) {
      out << (c + 1) << ',' << (i + 1) << ',' << format_g17(cs.deviance[c](i));
      for (int p = 0; p < cs.n_params(); ++p) out << ',' << format_g17(cs.draws[c](i, p));
      out << '\n';
    }
  }
}

ChainSet read_draws_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(1, 1, "empty file");
  auto header = split_fields(lines[0]);
  if (header.size() < 4 || header[0] != "chain" || header[1] != "iteration" || header[2] != "deviance")
    throw ParseError(1, 1, "header must start with chain,iteration,deviance");

  ChainSet cs;
  cs.names.assign(header.begin() + 3, header.end());
  const int n_params = static_cast<int>(cs.names.size());

  std::vector<std::vector<double>> dev_by_chain;
  std::vector<std::vector<double>> draws_by_chain;  // row-major per chain
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (static_cast<int>(f.size()) != n_params + 3)
      throw ParseError(lineno, static_cast<int>(f.size()), "wrong field count");
    const long chain = parse_int(f[0], lineno, 1);
    if (chain < 1) throw ParseError(lineno, 1, "chain must be >= 1");
    const auto ci = static_cast<std::size_t>(chain - 1);
    if (ci >= dev_by_chain.size()) {
      dev_by_chain.resize(ci + 1);
      draws_by_chain.resize(ci + 1);
    }
    dev_by_chain[ci].push_back(parse_double(f[2], lineno, 3));
    for (int p = 0; p < n_params; ++p)
      draws_by_chain[ci].push_back(parse_double(f[3 + p], lineno, 4 + p));
  }

  for (std::size_t c = 0; c < dev_by_chain.size(); ++c) {
    const int rows = static_cast<int>(dev_by_chain[c].size());
    if (rows == 0) throw ValidationError("draws file has a gap in chain numbering");
    cs.deviance.emplace_back(Eigen::Map<const Eigen::VectorXd>(dev_by_chain[c].data(), rows));
    cs.draws.emplace_back(
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            draws_by_chain[c].data(), rows, n_params));
  }
  if (cs.draws.empty()) throw ValidationError("no draws in " + path);
  const int n0 = static_cast<int>(cs.draws[0].rows());
  for (const auto& m : cs.draws)
    if (m.rows() != n0) throw ValidationError("chains have unequal stored lengths");
  return cs;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows,
                       const std::vector<double>& probabilities) {
  auto out = open_out(path);
  out << "name,mean,sd";
  for (double p : probabilities) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "q%g", p);
    out << ',' << buf;
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.name << ',' << format_g17(r.mean) << ',' << format_g17(r.sd);
    for (double q : r.quantiles) out << ',' << format_g17(q);
    out << '\n';
  }
}

void write_diagnostics_csv(const std::string& path, const std::vector<std::string>& names,
                           const Diagnostics& diag) {
  auto out = open_out(path);
  out << "name,rhat,ess,accept_rate\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',';
    if (i < diag.rhat.size() && std::isfinite(diag.rhat[i])) out << format_g17(diag.rhat[i]);
    out << ',';
    if (i < diag.ess.size() && std::isfinite(diag.ess[i])) out << format_g17(diag.ess[i]);
    out << ",\n";
  }
  for (const auto& [label, rate] : diag.accept_rates) {
    out << label << ",,," << format_g17(rate) << '\n';
  }
}

void write_curve_csv(const std::string& path, const CurveSummary& curve) {
  auto out = open_out(path);
  out << "grid_t,mean,lower,upper\n";
  for (int i = 0; i < curve.grid.size(); ++i) {
    out << format_g17(curve.grid(i)) << ',' << format_g17(curve.mean(i)) << ','
        << format_g17(curve.lower(i)) << ',' << format_g17(curve.upper(i)) << '\n';
  }
}

void write_km_csv(const std::string& path, const KaplanMeier& km, double horizon_days) {
  auto out = open_out(path);
  out << "time_days,survival,at_risk,events\n";
  for (int i = 0; i < km.time.size(); ++i) {
    out << format_g17(km.time(i) * horizon_days) << ',' << format_g17(km.survival(i)) << ','
        << km.at_risk[static_cast<std::size_t>(i)] << ',' << km.events[static_cast<std::size_t>(i)] << '\n';
  }
}

void write_study_records_csv(const std::string& path, const std::vector<CriteriaRecord>& records) {
  auto out = open_out(path);
  out << "replicate,seed,d,estimator,me,rmse,criw,cp\n";
  for (const auto& r : records) {
    out << r.replicate << ',' << r.seed << ',' << format_g17(r.d) << ',' << estimator_name(r.estimator)
        << ',' << format_g17(r.criteria.me) << ',' << format_g17(r.criteria.rmse) << ','
        << format_g17(r.criteria.criw) << ',' << format_g17(r.criteria.cp) << '\n';
  }
}

void write_study_table_csv(const std::string& path, const std::vector<StudyRow>& table) {
  auto out = open_out(path);
  out << "d,estimator,count,me_mean,me_se,rmse_mean,rmse_se,criw_mean,criw_se,cp_mean,cp_se\n";
  for (const auto& r : table) {
    out << format_g17(r.d) << ',' << estimator_name(r.estimator) << ',' << r.count << ','
        << format_g17(r.me_mean) << ',' << format_g17(r.me_se) << ',' << format_g17(r.rmse_mean) << ','
        << format_g17(r.rmse_se) << ',' << format_g17(r.criw_mean) << ',' << format_g17(r.criw_se) << ','
        << format_g17(r.cp_mean) << ',' << format_g17(r.cp_se) << '\n';
  }
}

void write_study_failures_csv(const std::string& path, const std::vector<FailedReplicate>& failures) {
  auto out = open_out(path);
  out << "replicate,seed,d,reason\n";
  for (const auto& f : failures) {
    std::string reason = f.reason;
    for (char& ch : reason)
      if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    out << f.replicate << ',' << f.seed << ',' << format_g17(f.d) << ',' << reason << '\n';
  }
}

void write_partition_report_csv(const std::string& path, const std::vector<PartitionReport>& reports) {
  auto out = open_out(path);
  out << "label,K,spacing,dbar,pd,dic\n";
  for (const auto& r : reports) {
    out << r.label << ',' << r.K << ',' << r.spacing << ',' << format_g17(r.dbar) << ','
        << format_g17(r.pd) << ',' << format_g17(r.dic) << '\n';
  }
}

void write_median_csv(const std::string& path, const std::vector<MedianRow>& rows) {
  auto out = open_out(path);
  out << "setting,mean_days,lower_days,upper_days,excluded,total,censored_at_horizon\n";
  for (const auto& r : rows) {
    out << r.setting << ',' << format_g17(r.summary.mean_days) << ',' << format_g17(r.summary.lower_days)
        << ',' << format_g17(r.summary.upper_days) << ',' << r.summary.excluded << ',' << r.summary.total
        << ',' << (r.summary.censored_at_horizon ? 1 : 0) << '\n';
  }
}

void write_hazard_ratio_csv(const std::string& path, const std::vector<HazardRatioRow>& rows) {
  auto out = open_out(path);
  out << "treatment,mean,lower,upper\n";
  for (const auto& r : rows) {
    out << r.treatment << ',' << format_g17(r.summary.mean) << ',' << format_g17(r.summary.lower) << ','
        << format_g17(r.summary.upper) << '\n';
  }
}

}  // namespace gmc

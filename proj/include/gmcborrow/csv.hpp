#pragma once

#include <string>
#include <vector>

#include "gmcborrow/engine.hpp"
#include "gmcborrow/regression.hpp"
#include "gmcborrow/simulate.hpp"
#include "gmcborrow/survival.hpp"

namespace gmc {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_g17(double v);

// Header must be exactly y,t,source or y,t,source,individual,region,tissue.
// Raw times are accepted only with rescale, which maps [min,max] onto [0,1].
RegressionDataset parse_regression_csv(const std::string& path, bool rescale = false);

// Header must be time_days,event,source or time_days,event,source,z_F,z_I.
// Times past the horizon are administratively censored there, then rescaled.
SurvivalDataset parse_survival_csv(const std::string& path, double horizon_days = 730.0);

void write_draws_csv(const std::string& path, const ChainSet& cs);

// Inverse of write_draws_csv up to the fields a summary needs (names, draws,
// deviance); acceptance rates and warnings are not stored in the file.
ChainSet read_draws_csv(const std::string& path);

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows,
                       const std::vector<double>& probabilities);

void write_diagnostics_csv(const std::string& path, const std::vector<std::string>& names,
                           const Diagnostics& diag);

void write_curve_csv(const std::string& path, const CurveSummary& curve);

void write_km_csv(const std::string& path, const KaplanMeier& km, double horizon_days);

void write_study_records_csv(const std::string& path, const std::vector<CriteriaRecord>& records);
void write_study_table_csv(const std::string& path, const std::vector<StudyRow>& table);
void write_study_failures_csv(const std::string& path, const std::vector<FailedReplicate>& failures);

void write_partition_report_csv(const std::string& path, const std::vector<PartitionReport>& reports);

struct MedianRow {
  std::string setting;
  MedianSummary summary;
};

void write_median_csv(const std::string& path, const std::vector<MedianRow>& rows);

struct HazardRatioRow {
  std::string treatment;
  HazardRatioSummary summary;
};

void write_hazard_ratio_csv(const std::string& path, const std::vector<HazardRatioRow>& rows);

}  // namespace gmc

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fusionbiopsy/harness.hpp"

namespace fusionbiopsy::report {

/// Full report as JSON text. Object keys are sorted and numbers print in
/// shortest round-trip form, so equal reports serialize to equal bytes.
std::string report_json(const harness::ExperimentReport& report);

/// One run (per-record outcomes plus metrics). `with_identity` adds the
/// setting name and repetition; without them, runs of equivalent settings
/// compare byte for byte.
std::string run_json(const harness::SettingRun& run, bool with_identity = true);
std::string summary_json(const harness::SettingSummary& summary, bool with_identity = true);

/// Structural check of a report.json document. Throws Error(ParseError)
/// naming the first violation.
void validate_report_json(std::string_view text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

/// CSV tables keyed by file name: settings.csv (mean and standard error
/// per setting, AUC/G-mean on [0,100], MCC on [-100,100]), folds.csv,
/// robustness.csv, acr.csv and generation.csv (when applicable).
std::map<std::string, std::string> tables(const harness::ExperimentReport& report);

/// Metric-vs-n SVG curves (robustness_auc.svg, robustness_gmean.svg,
/// robustness_mcc.svg) with series F, Cstar and FplusCstar. Empty when the
/// report has no starred settings.
std::map<std::string, std::string> robustness_plots(const harness::ExperimentReport& report);

/// Writes report.json, tables/ and plots/ under `out_dir`.
void write_report(const harness::ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace fusionbiopsy::report

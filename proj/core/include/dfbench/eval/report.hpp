#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfbench/eval/metrics.hpp"

namespace dfbench::eval {

// Column order of metrics.txt and of the comparison table.
const std::vector<std::string>& headline_metric_names();
std::vector<double> headline_values(const MetricsReport& report);

// Writes dir/report.json, dir/metrics.txt and dir/roc.tsv (one "fpr<TAB>tpr"
// row per ROC point). IoError names the failing path.
void emit_report(const MetricsReport& report, const std::filesystem::path& dir);
MetricsReport read_report(const std::filesystem::path& dir);

// Line-delimited PredictionRecord dumps.
void write_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

// Tab-separated table: Model then the seven headline metrics, one row per
// report, sorted by AUC (descending) then model name.
std::string comparison_table(std::vector<MetricsReport> reports);

}  // namespace dfbench::eval

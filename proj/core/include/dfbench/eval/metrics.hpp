#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dfbench/data/manifest.hpp"
#include "json.hpp"

namespace dfbench::eval {

inline constexpr double kDefaultThreshold = 0.5;

struct PredictionRecord {
  std::string sample_id;
  double score = 0.0;  // fake probability
  data::Label true_label = data::Label::real;
  std::string method = data::kOriginalMethod;
  double latency_seconds = 0.0;

  void validate() const;  // FormatError unless score in [0,1] and latency >= 0
  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
};

// Fake is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// score >= threshold predicts fake. ConfigError on empty input.
ConfusionMatrix confusion(const std::vector<PredictionRecord>& records,
                          double threshold = kDefaultThreshold);

struct ScalarMetrics {
  double accuracy = 0.0;
  double accuracy_real = 0.0;
  double accuracy_fake = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> degenerate;
};

ScalarMetrics scalar_metrics(const ConfusionMatrix& cm);

struct RocCurve {
  double auc = 0.0;
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)
};

// Rank statistic with ties counted 1/2. UndefinedMetricError without both classes.
double rank_auc(const std::vector<PredictionRecord>& records);
// Threshold sweep over distinct scores with trapezoidal area.
RocCurve roc_curve(const std::vector<PredictionRecord>& records);
// Curve plus the rank AUC; NumericError if the two disagree beyond 1e-9.
RocCurve roc_auc(const std::vector<PredictionRecord>& records);

std::map<std::string, std::size_t> fn_by_method(const std::vector<PredictionRecord>& records,
                                                double threshold = kDefaultThreshold);

struct TimingStats {
  double total_seconds = 0.0;
  std::size_t count = 0;
  double mean_seconds = 0.0;
};

TimingStats timing_stats(double total_seconds, std::size_t count);
TimingStats timing_stats(const std::vector<PredictionRecord>& records);

struct MetricsReport {
  std::string model;
  double threshold = kDefaultThreshold;
  ConfusionMatrix confusion;
  ScalarMetrics metrics;
  double auc = 0.0;
  std::vector<std::pair<double, double>> roc_points;
  std::map<std::string, std::size_t> fn_by_method;
  TimingStats timing;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  bool operator==(const MetricsReport& other) const;
};

MetricsReport build_report(const std::string& model, const std::vector<PredictionRecord>& records,
                           double threshold = kDefaultThreshold);

}  // namespace dfbench::eval

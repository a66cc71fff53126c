#include "dfbench/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dfbench/errors.hpp"

namespace dfbench::eval {

using nlohmann::json;

void PredictionRecord::validate() const {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw FormatError("prediction '" + sample_id + "': score " + std::to_string(score) +
                      " outside [0,1]");
  }
  if (!(latency_seconds >= 0.0)) {
    throw FormatError("prediction '" + sample_id + "': negative latency");
  }
}

json PredictionRecord::to_json() const {
  return {{"sample_id", sample_id},
          {"score", score},
          {"label", data::to_string(true_label)},
          {"method", method},
          {"latency_s", latency_seconds}};
}

PredictionRecord PredictionRecord::from_json(const json& j) {
  PredictionRecord r;
  r.sample_id = j.at("sample_id");
  r.score = j.at("score");
  r.true_label = data::parse_label(j.at("label"));
  r.method = j.value("method", data::kOriginalMethod);
  r.latency_seconds = j.value("latency_s", 0.0);
  r.validate();
  return r;
}

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records, double threshold) {
  if (records.empty()) throw ConfigError("confusion: no records");
  ConfusionMatrix cm;
  for (const auto& r : records) {
    const bool pred_fake = r.score >= threshold;
    const bool fake = r.true_label == data::Label::fake;
    if (pred_fake && fake) ++cm.tp;
    else if (pred_fake) ++cm.fp;
    else if (fake) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ScalarMetrics scalar_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("scalar_metrics: empty confusion matrix");
  ScalarMetrics m;
  auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      m.degenerate.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy");
  m.accuracy_real = ratio(cm.tn, cm.tn + cm.fp, "accuracy_real");
  m.accuracy_fake = ratio(cm.tp, cm.tp + cm.fn, "accuracy_fake");
  m.precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
  m.recall = ratio(cm.tp, cm.tp + cm.fn, "recall");
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.degenerate.emplace_back("f1");
  }
  return m;
}

namespace {

std::pair<std::size_t, std::size_t> class_counts(const std::vector<PredictionRecord>& records) {
  std::size_t fakes = 0;
  for (const auto& r : records) fakes += r.true_label == data::Label::fake;
  const std::size_t reals = records.size() - fakes;
  if (fakes == 0 || reals == 0) {
    throw UndefinedMetricError("AUC is undefined without both real and fake records");
  }
  return {fakes, reals};
}

}  // namespace

double rank_auc(const std::vector<PredictionRecord>& records) {
  const auto [nf, nr] = class_counts(records);
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return records[a].score < records[b].score; });
  // Twice the mid-rank keeps tie groups in integers.
  std::size_t fake_rank_sum2 = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && records[idx[j]].score == records[idx[i]].score) ++j;
    const std::size_t rank2 = i + 1 + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (records[idx[k]].true_label == data::Label::fake) fake_rank_sum2 += rank2;
    }
    i = j;
  }
  const double u2 = static_cast<double>(fake_rank_sum2) - static_cast<double>(nf * (nf + 1));
  return u2 / (2.0 * static_cast<double>(nf) * static_cast<double>(nr));
}

RocCurve roc_curve(const std::vector<PredictionRecord>& records) {
  const auto [nf, nr] = class_counts(records);
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return records[a].score > records[b].score; });
  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = records[idx[i]].score;
    while (i < idx.size() && records[idx[i]].score == s) {
      if (records[idx[i]].true_label == data::Label::fake) ++tp;
      else ++fp;
      ++i;
    }
    roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(nr),
                            static_cast<double>(tp) / static_cast<double>(nf));
  }
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto [x0, y0] = roc.points[i - 1];
    const auto [x1, y1] = roc.points[i];
    roc.auc += (x1 - x0) * (y0 + y1) / 2.0;
  }
  return roc;
}

RocCurve roc_auc(const std::vector<PredictionRecord>& records) {
  RocCurve roc = roc_curve(records);
  const double ranked = rank_auc(records);
  if (std::abs(ranked - roc.auc) > 1e-9) {
    throw NumericError("rank AUC " + std::to_string(ranked) + " disagrees with trapezoidal AUC " +
                       std::to_string(roc.auc));
  }
  roc.auc = ranked;
  return roc;
}

std::map<std::string, std::size_t> fn_by_method(const std::vector<PredictionRecord>& records,
                                                double threshold) {
  std::map<std::string, std::size_t> out;
  for (const auto& r : records) {
    if (r.true_label == data::Label::fake && r.score < threshold) ++out[r.method];
  }
  return out;
}

TimingStats timing_stats(double total_seconds, std::size_t count) {
  if (count == 0) throw ConfigError("timing_stats: no samples");
  if (!(total_seconds >= 0.0)) throw ConfigError("timing_stats: negative total");
  return {total_seconds, count, total_seconds / static_cast<double>(count)};
}

TimingStats timing_stats(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw ConfigError("timing_stats: no records");
  double total = 0.0;
  for (const auto& r : records) {
    if (!(r.latency_seconds >= 0.0)) throw ConfigError("timing_stats: negative latency");
    total += r.latency_seconds;
  }
  return timing_stats(total, records.size());
}

json MetricsReport::to_json() const {
  json roc = json::array();
  for (const auto& [x, y] : roc_points) roc.push_back({x, y});
  return {{"model", model},
          {"threshold", threshold},
          {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}},
          {"accuracy", metrics.accuracy},
          {"accuracy_real", metrics.accuracy_real},
          {"accuracy_fake", metrics.accuracy_fake},
          {"precision", metrics.precision},
          {"recall", metrics.recall},
          {"f1", metrics.f1},
          {"degenerate", metrics.degenerate},
          {"auc", auc},
          {"roc_points", roc},
          {"fn_by_method", fn_by_method},
          {"timing",
           {{"total_s", timing.total_seconds}, {"n", timing.count}, {"mean_s_per_sample", timing.mean_seconds}}}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.model = j.at("model");
  r.threshold = j.at("threshold");
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp"), c.at("fp"), c.at("tn"), c.at("fn")};
  r.metrics.accuracy = j.at("accuracy");
  r.metrics.accuracy_real = j.at("accuracy_real");
  r.metrics.accuracy_fake = j.at("accuracy_fake");
  r.metrics.precision = j.at("precision");
  r.metrics.recall = j.at("recall");
  r.metrics.f1 = j.at("f1");
  r.metrics.degenerate = j.at("degenerate").get<std::vector<std::string>>();
  r.auc = j.at("auc");
  for (const auto& p : j.at("roc_points")) r.roc_points.emplace_back(p.at(0), p.at(1));
  r.fn_by_method = j.at("fn_by_method").get<std::map<std::string, std::size_t>>();
  const auto& t = j.at("timing");
  r.timing = {t.at("total_s"), t.at("n"), t.at("mean_s_per_sample")};
  return r;
}

bool MetricsReport::operator==(const MetricsReport& o) const {
  const auto same = [](const ScalarMetrics& a, const ScalarMetrics& b) {
    return a.accuracy == b.accuracy && a.accuracy_real == b.accuracy_real &&
           a.accuracy_fake == b.accuracy_fake && a.precision == b.precision &&
           a.recall == b.recall && a.f1 == b.f1 && a.degenerate == b.degenerate;
  };
  return model == o.model && threshold == o.threshold && confusion == o.confusion &&
         same(metrics, o.metrics) && auc == o.auc && roc_points == o.roc_points &&
         fn_by_method == o.fn_by_method && timing.total_seconds == o.timing.total_seconds &&
         timing.count == o.timing.count && timing.mean_seconds == o.timing.mean_seconds;
}

MetricsReport build_report(const std::string& model, const std::vector<PredictionRecord>& records,
                           double threshold) {
  MetricsReport r;
  r.model = model;
  r.threshold = threshold;
  r.confusion = confusion(records, threshold);
  r.metrics = scalar_metrics(r.confusion);
  const RocCurve roc = roc_auc(records);
  r.auc = roc.auc;
  r.roc_points = roc.points;
  r.fn_by_method = fn_by_method(records, threshold);
  r.timing = timing_stats(records);
  return r;
}

}  // namespace dfbench::eval

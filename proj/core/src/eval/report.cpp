#include "dfbench/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfbench/errors.hpp"
#include "../fs_util.hpp"

namespace dfbench::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

const std::vector<std::string>& headline_metric_names() {
  static const std::vector<std::string> names = {"Acc",      "Acc Real",  "Acc Fake", "AUC",
                                                 "F1",       "Precision", "Recall"};
  return names;
}

std::vector<double> headline_values(const MetricsReport& r) {
  return {r.metrics.accuracy, r.metrics.accuracy_real, r.metrics.accuracy_fake, r.auc,
          r.metrics.f1,       r.metrics.precision,     r.metrics.recall};
}

void emit_report(const MetricsReport& report, const fs::path& dir) {
  {
    auto out = open_out(dir / "report.json");
    out << report.to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing " + (dir / "report.json").string());
  }
  {
    auto out = open_out(dir / "metrics.txt");
    const auto& names = headline_metric_names();
    const auto values = headline_values(report);
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << fixed(values[i]) << '\n';
    const auto& cm = report.confusion;
    out << "TP\t" << cm.tp << "\nFP\t" << cm.fp << "\nTN\t" << cm.tn << "\nFN\t" << cm.fn << '\n';
    out << "Threshold\t" << fixed(report.threshold) << '\n';
    out << "Samples\t" << report.timing.count << '\n';
    out << "Total time (s)\t" << fixed(report.timing.total_seconds, 3) << '\n';
    out << "Mean time (s/sample)\t" << fixed(report.timing.mean_seconds, 2) << '\n';
    for (const auto& [method, n] : report.fn_by_method) out << "FN " << method << '\t' << n << '\n';
    if (!out) throw IoError("failed writing " + (dir / "metrics.txt").string());
  }
  {
    auto out = open_out(dir / "roc.tsv");
    for (const auto& [fpr, tpr] : report.roc_points) out << fixed(fpr, 8) << '\t' << fixed(tpr, 8) << '\n';
    if (!out) throw IoError("failed writing " + (dir / "roc.tsv").string());
  }
}

MetricsReport read_report(const fs::path& dir) {
  const fs::path path = dir / "report.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return MetricsReport::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_predictions(const std::vector<PredictionRecord>& records, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prediction dump " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(PredictionRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string comparison_table(std::vector<MetricsReport> reports) {
  std::sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
    if (a.auc != b.auc) return a.auc > b.auc;
    return a.model < b.model;
  });
  std::ostringstream out;
  out << "Model";
  for (const auto& n : headline_metric_names()) out << '\t' << n;
  out << '\n';
  for (const auto& r : reports) {
    out << r.model;
    for (double v : headline_values(r)) out << '\t' << fixed(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace dfbench::eval

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pyrseiz/evaluation.hpp"

namespace pyrseiz {

using json = nlohmann::ordered_json;

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw Error("unknown report format '" + std::string(name) + "' (valid: csv, json)");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

std::string cell(std::optional<double> v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string csv_row(const CvReport& r, const std::string& fold, double acc, double acc_v, const Metrics& m,
                    const std::string& ties) {
  return r.run.case_name + "," + std::to_string(r.run.scheme) + "," + r.run.model + "," + fold + "," + cell(acc) +
         "," + cell(acc_v) + "," + cell(m.sen) + "," + cell(m.spe) + "," + cell(m.precision) + "," + cell(m.f_m) +
         "," + cell(m.g_m) + "," + ties + "\n";
}

Metrics as_metrics(const MetricSummary& s) { return {s.acc, s.sen, s.spe, s.precision, s.f_m, s.g_m}; }

json opt(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json matrix_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (int i = 0; i < cm.classes(); ++i) {
    json row = json::array();
    for (int j = 0; j < cm.classes(); ++j) row.push_back(cm(i, j));
    rows.push_back(row);
  }
  return rows;
}

ConfusionMatrix matrix_from(const json& j) {
  const auto n = static_cast<Index>(j.size());
  ConfusionMatrix::Counts c(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(j[i].size()) != n) throw Error("confusion matrix in report is not square");
    for (Index k = 0; k < n; ++k) c(i, k) = j[i][k].get<long long>();
  }
  return ConfusionMatrix(std::move(c));
}

json summary_json(const MetricSummary& s) {
  return {{"acc", s.acc},          {"acc_v", s.acc_v}, {"sen", opt(s.sen)}, {"spe", opt(s.spe)},
          {"precision", opt(s.precision)}, {"f_m", opt(s.f_m)}, {"g_m", opt(s.g_m)}};
}

MetricSummary summary_from(const json& j) {
  return {j.at("acc").get<double>(), j.at("acc_v").get<double>(), opt_from(j.at("sen")),
          opt_from(j.at("spe")),     opt_from(j.at("precision")),  opt_from(j.at("f_m")),
          opt_from(j.at("g_m"))};
}

template <typename T, std::size_t N>
std::array<T, N> array_from(const json& j) {
  std::array<T, N> a{};
  for (std::size_t i = 0; i < N; ++i) a[i] = j.at(i).get<T>();
  return a;
}

}  // namespace

std::string report_csv(std::span<const CvReport> reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) out += csv_row(r, std::to_string(f.fold), f.acc, f.acc_v, f.metrics, std::to_string(f.ties));
    out += csv_row(r, "mean", r.mean.acc, r.mean.acc_v, as_metrics(r.mean), std::to_string(r.ties));
    out += csv_row(r, "std", r.std.acc, r.std.acc_v, as_metrics(r.std), "");
  }
  return out;
}

std::string report_json(const CvReport& r) {
  const auto& t = r.run.training;
  const auto& m = r.run.model_config;
  json config = {
      {"case", r.run.case_name},
      {"scheme", r.run.scheme},
      {"model", r.run.model},
      {"kernel_counts", m.kernel_counts},
      {"receptive_fields", m.receptive_fields},
      {"strides", m.strides},
      {"fc1_width", m.fc1_width},
      {"dropout_rate", m.dropout_rate},
      {"num_classes", m.num_classes},
      {"input_length", m.input_length},
      {"learning_rate", t.adam.learning_rate},
      {"beta1", t.adam.beta1},
      {"beta2", t.adam.beta2},
      {"epsilon", t.adam.epsilon},
      {"batch_size", t.batch_size},
      {"epochs", t.epochs},
      {"seed", t.seed},
      {"shuffle", t.shuffle},
      {"dropout_seed", t.dropout_seed ? json(*t.dropout_seed) : json(nullptr)},
      {"class_weighting", t.class_weighting},
      {"folds", r.run.folds},
      {"fold_seed", r.run.fold_seed},
  };
  json folds = json::array();
  for (const auto& f : r.folds) {
    json jf = {{"fold", f.fold},
               {"acc", f.acc},
               {"acc_v", f.acc_v},
               {"sen", opt(f.metrics.sen)},
               {"spe", opt(f.metrics.spe)},
               {"precision", opt(f.metrics.precision)},
               {"f_m", opt(f.metrics.f_m)},
               {"g_m", opt(f.metrics.g_m)},
               {"ties", f.ties},
               {"train_windows", f.train_windows},
               {"test_windows", f.test_windows},
               {"acc_record", opt(f.acc_record)},
               {"window_confusion", matrix_json(f.window_confusion)},
               {"instance_confusion", matrix_json(f.instance_confusion)}};
    folds.push_back(std::move(jf));
  }
  json doc = {{"format", "pyrseiz-report-v1"},
              {"metric_convention", kMetricConvention},
              {"config", config},
              {"folds", folds},
              {"mean", summary_json(r.mean)},
              {"std", summary_json(r.std)},
              {"ties", r.ties},
              {"instance_confusion", matrix_json(r.instance_confusion)}};
  return doc.dump(2) + "\n";
}

CvReport parse_report_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "pyrseiz-report-v1") throw Error("unsupported report format");
    CvReport r;
    const json& c = doc.at("config");
    r.run.case_name = c.at("case").get<std::string>();
    r.run.scheme = c.at("scheme").get<int>();
    r.run.model = c.at("model").get<std::string>();
    auto& m = r.run.model_config;
    m.kernel_counts = array_from<Index, 3>(c.at("kernel_counts"));
    m.receptive_fields = array_from<Index, 3>(c.at("receptive_fields"));
    m.strides = array_from<Index, 3>(c.at("strides"));
    m.fc1_width = c.at("fc1_width").get<Index>();
    m.dropout_rate = c.at("dropout_rate").get<double>();
    m.num_classes = c.at("num_classes").get<Index>();
    m.input_length = c.at("input_length").get<Index>();
    auto& t = r.run.training;
    t.adam.learning_rate = c.at("learning_rate").get<double>();
    t.adam.beta1 = c.at("beta1").get<double>();
    t.adam.beta2 = c.at("beta2").get<double>();
    t.adam.epsilon = c.at("epsilon").get<double>();
    t.batch_size = c.at("batch_size").get<Index>();
    t.epochs = c.at("epochs").get<int>();
    t.seed = c.at("seed").get<Seed>();
    t.shuffle = c.at("shuffle").get<bool>();
    if (!c.at("dropout_seed").is_null()) t.dropout_seed = c.at("dropout_seed").get<Seed>();
    t.class_weighting = c.at("class_weighting").get<bool>();
    r.run.folds = c.at("folds").get<int>();
    r.run.fold_seed = c.at("fold_seed").get<Seed>();

    for (const auto& jf : doc.at("folds")) {
      FoldResult f;
      f.fold = jf.at("fold").get<int>();
      f.acc = jf.at("acc").get<double>();
      f.acc_v = jf.at("acc_v").get<double>();
      f.metrics = {f.acc_v,
                   opt_from(jf.at("sen")),
                   opt_from(jf.at("spe")),
                   opt_from(jf.at("precision")),
                   opt_from(jf.at("f_m")),
                   opt_from(jf.at("g_m"))};
      f.ties = jf.at("ties").get<int>();
      f.train_windows = jf.at("train_windows").get<Index>();
      f.test_windows = jf.at("test_windows").get<Index>();
      f.acc_record = opt_from(jf.at("acc_record"));
      f.window_confusion = matrix_from(jf.at("window_confusion"));
      f.instance_confusion = matrix_from(jf.at("instance_confusion"));
      r.folds.push_back(std::move(f));
    }
    r.mean = summary_from(doc.at("mean"));
    r.std = summary_from(doc.at("std"));
    r.ties = doc.at("ties").get<int>();
    r.instance_confusion = matrix_from(doc.at("instance_confusion"));
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
}

void emit_report(std::span<const CvReport> reports, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    write_text(path, report_csv(reports));
    return;
  }
  if (reports.size() == 1) {
    write_text(path, report_json(reports.front()));
    return;
  }
  std::string text = "[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) text += (i ? ",\n" : "") + report_json(reports[i]);
  write_text(path, text + "]\n");
}

std::string battery_csv(const BatteryReport& battery) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& row : battery.rows) {
    const auto& r = row.report;
    out += csv_row(r, "mean", r.mean.acc, r.mean.acc_v, as_metrics(r.mean), std::to_string(r.ties));
  }
  return out;
}

std::string battery_comparison_csv(const BatteryReport& battery) {
  std::string out = "case,reference_acc,our_acc\n";
  char buf[64];
  for (const auto& row : battery.rows) {
    if (std::isnan(row.reference_acc))
      std::snprintf(buf, sizeof buf, ",,%.2f\n", 100.0 * row.report.mean.acc_v);
    else
      std::snprintf(buf, sizeof buf, ",%.2f,%.2f\n", row.reference_acc, 100.0 * row.report.mean.acc_v);
    out += row.case_name + buf;
  }
  return out;
}

}  // namespace pyrseiz

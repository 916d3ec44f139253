#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pyrseiz/dataset.hpp"
#include "pyrseiz/ensemble.hpp"
#include "pyrseiz/training.hpp"

namespace pyrseiz {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes) : counts_(Counts::Zero(classes, classes)) {}
  explicit ConfusionMatrix(Counts counts);

  void add(int truth, int predicted, long long n = 1);
  int classes() const { return static_cast<int>(counts_.rows()); }
  long long total() const { return counts_.sum(); }
  long long operator()(int truth, int predicted) const { return counts_(truth, predicted); }
  const Counts& counts() const { return counts_; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const { return counts_ == other.counts_; }

 private:
  Counts counts_;
};

/// Rates in [0, 1]. Empty optionals mark zero denominators.
struct Metrics {
  double acc = 0.0;
  std::optional<double> sen;
  std::optional<double> spe;
  std::optional<double> precision;
  std::optional<double> f_m;
  std::optional<double> g_m;
};

/// Binary matrices read TP/TN/FP/FN around `positive_class` (default: the
/// last class). Larger matrices report one-vs-rest metrics macro-averaged
/// over classes, undefined when any class is undefined. Acc is always
/// trace / total.
Metrics compute_metrics(const ConfusionMatrix& cm, std::optional<int> positive_class = std::nullopt);

inline constexpr const char* kMetricConvention =
    "acc per 512-sample window; acc_v per 1024-sample test instance after majority vote; "
    "sen/spe/precision/f_m/g_m from the instance-level confusion matrix, positive class = last group for binary "
    "cases, macro one-vs-rest for multi-class cases";

struct FoldResult {
  int fold = 0;  // 1-based
  double acc = 0.0;
  double acc_v = 0.0;
  Metrics metrics;  // instance level
  int ties = 0;
  ConfusionMatrix window_confusion;
  ConfusionMatrix instance_confusion;
  std::optional<double> acc_record;  // set when record-level aggregation is enabled
  Index train_windows = 0;
  Index test_windows = 0;
  std::vector<VoteRecord> votes;
  std::vector<EpochStats> history;
};

struct MetricSummary {
  double acc = 0.0;
  double acc_v = 0.0;
  std::optional<double> sen, spe, precision, f_m, g_m;
};

/// Resolved configuration echoed into every report.
struct RunDescription {
  std::string case_name;
  int scheme = 1;
  std::string model = "custom";
  ModelConfig model_config;
  TrainingConfig training;
  int folds = 10;
  Seed fold_seed = 0;
};

struct CvReport {
  RunDescription run;
  std::vector<FoldResult> folds;
  MetricSummary mean;
  MetricSummary std;  // sample standard deviation across folds
  int ties = 0;
  ConfusionMatrix instance_confusion;  // summed over folds
};

/// Mean and sample standard deviation over the folds' values; undefined
/// fold values are skipped.
void summarize(CvReport& report);

struct CvOptions {
  bool independent_experts = false;  // one separately seeded model per ensemble position
  bool record_level = false;
  bool keep_votes = true;
  int jobs = 1;
  std::function<void(const FoldResult&)> on_fold;
  // Called with the trained parameters of each fold (fold index, expert index).
  std::function<void(int, int, const NetworkParameters<double>&)> on_model;
};

/// k-fold cross-validation: per fold, train on augmented windows of the
/// training records and evaluate windows and voted instances of the test
/// records.
CvReport run_cv(std::span<const EegRecord> records, const ExperimentCase& ec, const SchemeSpec& scheme,
                const ModelConfig& model, const TrainingConfig& training, const FoldPlan& plan,
                const CvOptions& options = {});

struct BatteryRow {
  std::string case_name;
  CvReport report;
  double reference_acc = 0.0;  // percent
};

struct BatteryReport {
  std::vector<BatteryRow> rows;
  double mean_acc_v = 0.0;
};

/// Runs cross-validation on each case with a fold plan seeded by `seed`.
BatteryReport run_battery(std::span<const EegRecord> records, std::span<const std::string> cases,
                          const SchemeSpec& scheme, const std::string& model_name, const ModelConfig& base_model,
                          const TrainingConfig& training, int k, Seed seed, const CvOptions& options = {},
                          const std::function<void(const BatteryRow&)>& on_case = {});

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view name);

inline constexpr const char* kReportCsvHeader = "case,scheme,model,fold,acc,acc_v,sen,spe,precision,f_m,g_m,ties";

/// One row per fold followed by "mean" and "std" rows. An empty report
/// yields only the header.
std::string report_csv(std::span<const CvReport> reports);
std::string report_json(const CvReport& report);
CvReport parse_report_json(const std::string& text);

void emit_report(std::span<const CvReport> reports, const std::filesystem::path& path, ReportFormat format);

/// Mean rows of every case.
std::string battery_csv(const BatteryReport& battery);
/// Columns case,reference_acc,our_acc (percent).
std::string battery_comparison_csv(const BatteryReport& battery);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pyrseiz

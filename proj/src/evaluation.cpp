#include "pyrseiz/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace pyrseiz {

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw Error("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw Error("confusion counts must be non-negative");
}

void ConfusionMatrix::add(int truth, int predicted, long long n) {
  if (truth < 0 || truth >= classes() || predicted < 0 || predicted >= classes())
    throw Error("confusion matrix index out of range");
  counts_(truth, predicted) += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (counts_.size() == 0) {
    counts_ = other.counts_;
    return *this;
  }
  if (other.classes() != classes()) throw Error("confusion matrices of different sizes");
  counts_ += other.counts_;
  return *this;
}

namespace {

std::optional<double> ratio(long long num, long long den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}

Metrics one_vs_rest(const ConfusionMatrix& cm, int positive) {
  const auto& c = cm.counts();
  const long long tp = c(positive, positive);
  const long long fn = c.row(positive).sum() - tp;
  const long long fp = c.col(positive).sum() - tp;
  const long long tn = cm.total() - tp - fn - fp;
  Metrics m;
  m.acc = double(tp + tn) / double(cm.total());
  m.sen = ratio(tp, tp + fn);
  m.spe = ratio(tn, tn + fp);
  m.precision = ratio(tp, tp + fp);
  if (m.precision && m.sen && (*m.precision + *m.sen) > 0.0)
    m.f_m = 2.0 * *m.precision * *m.sen / (*m.precision + *m.sen);
  if (m.spe && m.sen) m.g_m = std::sqrt(*m.spe * *m.sen);
  return m;
}

std::optional<double> macro(const std::vector<Metrics>& per_class, std::optional<double> Metrics::*field) {
  double sum = 0.0;
  for (const auto& m : per_class) {
    if (!(m.*field)) return std::nullopt;
    sum += *(m.*field);
  }
  return sum / double(per_class.size());
}

}  // namespace

Metrics compute_metrics(const ConfusionMatrix& cm, std::optional<int> positive_class) {
  if (cm.classes() < 2) throw Error("confusion matrix needs at least two classes");
  if (cm.total() <= 0) throw Error("confusion matrix is empty");
  if (cm.classes() == 2) {
    const int positive = positive_class.value_or(1);
    if (positive < 0 || positive > 1) throw Error("positive class out of range");
    return one_vs_rest(cm, positive);
  }
  std::vector<Metrics> per_class;
  for (int c = 0; c < cm.classes(); ++c) per_class.push_back(one_vs_rest(cm, c));
  Metrics m;
  m.acc = double(cm.counts().trace()) / double(cm.total());
  m.sen = macro(per_class, &Metrics::sen);
  m.spe = macro(per_class, &Metrics::spe);
  m.precision = macro(per_class, &Metrics::precision);
  m.f_m = macro(per_class, &Metrics::f_m);
  m.g_m = macro(per_class, &Metrics::g_m);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

struct Stat {
  double sum = 0.0;
  int n = 0;
  void add(std::optional<double> v) {
    if (!v) return;
    sum += *v;
    ++n;
  }
  std::optional<double> mean() const { return n ? std::optional(sum / n) : std::nullopt; }
};

std::optional<double> sample_std(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values)
    if (x) v.push_back(*x);
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(v.size() - 1));
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  Stat s;
  for (const auto& v : values) s.add(v);
  return s.mean();
}

}  // namespace

void summarize(CvReport& report) {
  std::vector<std::optional<double>> acc, acc_v, sen, spe, prec, fm, gm;
  report.ties = 0;
  report.instance_confusion = ConfusionMatrix();
  for (const auto& f : report.folds) {
    acc.push_back(f.acc);
    acc_v.push_back(f.acc_v);
    sen.push_back(f.metrics.sen);
    spe.push_back(f.metrics.spe);
    prec.push_back(f.metrics.precision);
    fm.push_back(f.metrics.f_m);
    gm.push_back(f.metrics.g_m);
    report.ties += f.ties;
    report.instance_confusion += f.instance_confusion;
  }
  auto fill = [&](MetricSummary& s, auto reduce) {
    s.acc = reduce(acc).value_or(0.0);
    s.acc_v = reduce(acc_v).value_or(0.0);
    s.sen = reduce(sen);
    s.spe = reduce(spe);
    s.precision = reduce(prec);
    s.f_m = reduce(fm);
    s.g_m = reduce(gm);
  };
  fill(report.mean, mean_of);
  fill(report.std, sample_std);
}

namespace {

FoldResult run_fold(int fold, const std::map<std::string, const EegRecord*>& by_id, const ExperimentCase& ec,
                    const SchemeSpec& scheme, const ModelConfig& model, const TrainingConfig& training,
                    const FoldPlan& plan, const CvOptions& options) {
  std::vector<EegRecord> train_records, test_records;
  for (const auto& id : plan.train_ids(fold)) train_records.push_back(*by_id.at(id));
  for (const auto& id : plan.test_ids(fold)) test_records.push_back(*by_id.at(id));

  FoldResult result;
  result.fold = fold + 1;
  const auto windows = augment_training(train_records, ec, scheme);
  result.train_windows = static_cast<Index>(windows.size());

  const Index width = scheme.ensemble_width();
  const int expert_count = options.independent_experts ? static_cast<int>(width) : 1;
  TrainingConfig fold_training = training;
  fold_training.seed = derive_seed(training.seed, 1000 + static_cast<std::uint64_t>(fold));
  std::vector<NetworkParameters<double>> experts;
  for (int e = 0; e < expert_count; ++e) {
    TrainingConfig cfg = fold_training;
    if (e > 0) cfg.seed = derive_seed(fold_training.seed, static_cast<std::uint64_t>(e));
    auto trained = train(model, windows, cfg);
    if (e == 0) result.history = trained.history;
    if (options.on_model) options.on_model(fold + 1, e, trained.params);
    experts.push_back(std::move(trained.params));
  }

  result.window_confusion = ConfusionMatrix(ec.num_classes);
  result.instance_confusion = ConfusionMatrix(ec.num_classes);
  long long record_correct = 0;
  for (const auto& record : test_records) {
    std::vector<int> record_votes;
    std::vector<Vector<double>> record_probs;
    for (const auto& inst : segment_testing(record, ec, scheme)) {
      VoteRecord vr = predict_instance(model, experts, inst, scheme);
      for (const auto& v : vr.votes) {
        result.window_confusion.add(vr.label, v.cls);
        record_votes.push_back(v.cls);
        record_probs.push_back(v.probabilities);
      }
      result.instance_confusion.add(vr.label, vr.final_class);
      if (vr.tie_broken) ++result.ties;
      if (options.keep_votes) result.votes.push_back(std::move(vr));
    }
    if (options.record_level && majority_vote(record_votes, record_probs).cls == ec.class_of(record.set_label))
      ++record_correct;
  }
  result.test_windows = static_cast<Index>(result.window_confusion.total());
  result.acc = compute_metrics(result.window_confusion).acc;
  result.metrics = compute_metrics(result.instance_confusion);
  result.acc_v = result.metrics.acc;
  if (options.record_level) result.acc_record = double(record_correct) / double(test_records.size());
  return result;
}

}  // namespace

CvReport run_cv(std::span<const EegRecord> records, const ExperimentCase& ec, const SchemeSpec& scheme,
                const ModelConfig& model, const TrainingConfig& training, const FoldPlan& plan,
                const CvOptions& options) {
  model.validate();
  training.validate();
  scheme.validate();
  if (model.num_classes != ec.num_classes)
    throw Error("model has " + std::to_string(model.num_classes) + " classes but case " + ec.name + " has " +
                std::to_string(ec.num_classes));

  std::map<std::string, const EegRecord*> by_id;
  for (const auto& r : records)
    if (!by_id.emplace(r.id(), &r).second) throw Error("duplicate record id " + r.id());

  std::set<std::string> tested;
  for (int f = 0; f < plan.k; ++f) {
    const auto test = plan.test_ids(f);
    const std::set<std::string> test_set(test.begin(), test.end());
    for (const auto& id : test) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("fold plan references unknown record " + id);
      if (!ec.contains(it->second->set_label)) throw Error("fold plan record " + id + " is outside case " + ec.name);
      if (!tested.insert(id).second) throw Error("record " + id + " is tested in more than one fold");
    }
    for (const auto& id : plan.train_ids(f)) {
      if (test_set.contains(id)) throw Error("leakage: record " + id + " is both training and test in fold " +
                                             std::to_string(f + 1));
      if (!by_id.contains(id)) throw Error("fold plan references unknown record " + id);
    }
  }

  CvReport report;
  report.folds.resize(static_cast<std::size_t>(plan.k));
  std::mutex callback_mutex;
  auto run_one = [&](int f) {
    report.folds[static_cast<std::size_t>(f)] = run_fold(f, by_id, ec, scheme, model, training, plan, options);
    if (options.on_fold) {
      std::lock_guard lock(callback_mutex);
      options.on_fold(report.folds[static_cast<std::size_t>(f)]);
    }
  };

  const int jobs = std::max(1, std::min(options.jobs, plan.k));
  if (jobs == 1) {
    for (int f = 0; f < plan.k; ++f) run_one(f);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (int f; (f = next.fetch_add(1)) < plan.k;) {
          try {
            run_one(f);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }

  report.run.case_name = ec.name;
  report.run.scheme = scheme.id;
  report.run.model_config = model;
  report.run.training = training;
  report.run.folds = plan.k;
  report.run.fold_seed = plan.seed;
  summarize(report);
  return report;
}

BatteryReport run_battery(std::span<const EegRecord> records, std::span<const std::string> cases,
                          const SchemeSpec& scheme, const std::string& model_name, const ModelConfig& base_model,
                          const TrainingConfig& training, int k, Seed seed, const CvOptions& options,
                          const std::function<void(const BatteryRow&)>& on_case) {
  BatteryReport battery;
  double sum = 0.0;
  for (const auto& name : cases) {
    const ExperimentCase ec = define_case(name);
    ModelConfig model = base_model;
    model.num_classes = ec.num_classes;
    const FoldPlan plan = plan_folds(strata_for_case({records.begin(), records.end()}, ec), k, seed);
    BatteryRow row{ec.name, run_cv(records, ec, scheme, model, training, plan, options), 0.0};
    row.report.run.model = model_name;
    try {
      row.reference_acc = reference_accuracy(ec.name);
    } catch (const Error&) {
      row.reference_acc = std::nan("");
    }
    sum += row.report.mean.acc_v;
    if (on_case) on_case(row);
    battery.rows.push_back(std::move(row));
  }
  battery.mean_acc_v = battery.rows.empty() ? 0.0 : sum / double(battery.rows.size());
  return battery;
}

}  // namespace pyrseiz

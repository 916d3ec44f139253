#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "pyrseiz/evaluation.hpp"

namespace pyrseiz::cli {

namespace fs = std::filesystem;

namespace {

/// Flags shared by train, cv, battery and predict.
struct RunConfig {
  std::string data_root;
  std::string case_spec = "AB-CD-E";
  int scheme = 1;
  std::string model = "M5";
  std::optional<Index> fc1;
  std::optional<double> dropout;
  double lr = 1e-3;
  Index batch = 32;
  int epochs = 50;
  Seed seed = 1;
  int jobs = 1;
  int folds = 10;
  std::string out = "runs";
  std::string format = "csv";
  bool vote_log = false;
  bool independent_experts = false;
  bool record_level = false;
  bool class_weighting = false;
};

void add_model_flags(CLI::App& cmd, RunConfig& rc) {
  cmd.add_option("--scheme", rc.scheme, "Augmentation scheme")->check(CLI::IsMember({1, 2}));
  cmd.add_option("--model", rc.model, "Model name M1..M8");
  cmd.add_option("--fc1", rc.fc1, "FC1 width override")->check(CLI::IsMember({20, 40}));
  cmd.add_option("--dropout", rc.dropout, "Dropout rate override")->check(CLI::Range(0.0, 0.99));
}

void add_training_flags(CLI::App& cmd, RunConfig& rc) {
  cmd.add_option("--data-root", rc.data_root, "Dataset directory or manifest (env PYRSEIZ_DATA)");
  cmd.add_option("--case", rc.case_spec, "Experiment case, e.g. AB-CD-E");
  add_model_flags(cmd, rc);
  cmd.add_option("--lr", rc.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd.add_option("--batch", rc.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd.add_option("--epochs", rc.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  cmd.add_option("--seed", rc.seed, "Random seed");
  cmd.add_option("--out", rc.out, "Output directory");
  cmd.add_flag("--class-weighting", rc.class_weighting, "Inverse-frequency loss weights");
}

ModelConfig resolve_model(const RunConfig& rc, Index num_classes) {
  ModelConfig m = model_by_name(rc.model, num_classes);
  if (rc.fc1) m.fc1_width = *rc.fc1;
  if (rc.dropout) m.dropout_rate = *rc.dropout;
  m.validate();
  return m;
}

TrainingConfig resolve_training(const RunConfig& rc) {
  TrainingConfig t;
  t.adam.learning_rate = rc.lr;
  t.batch_size = rc.batch;
  t.epochs = rc.epochs;
  t.seed = rc.seed;
  t.class_weighting = rc.class_weighting;
  t.validate();
  return t;
}

std::vector<EegRecord> load_data(const RunConfig& rc) {
  std::string root = rc.data_root;
  if (root.empty())
    if (const char* env = std::getenv("PYRSEIZ_DATA")) root = env;
  if (root.empty()) throw Error("no dataset: pass --data-root or set PYRSEIZ_DATA");
  return load_dataset(root);
}

std::string stem(const std::string& kind, const RunConfig& rc, const std::string& case_name) {
  std::string s = kind + "_";
  if (!case_name.empty()) s += case_name + "_";
  return s + rc.model + "_scheme" + std::to_string(rc.scheme) + "_seed" + std::to_string(rc.seed);
}

std::string config_json(const RunConfig& rc, const ModelConfig& m, const TrainingConfig& t) {
  nlohmann::ordered_json j = {
      {"case", rc.case_spec},           {"scheme", rc.scheme},
      {"model", rc.model},              {"kernel_counts", m.kernel_counts},
      {"receptive_fields", m.receptive_fields}, {"strides", m.strides},
      {"fc1_width", m.fc1_width},       {"dropout_rate", m.dropout_rate},
      {"num_classes", m.num_classes},   {"learning_rate", t.adam.learning_rate},
      {"beta1", t.adam.beta1},          {"beta2", t.adam.beta2},
      {"epsilon", t.adam.epsilon},      {"batch_size", t.batch_size},
      {"epochs", t.epochs},             {"seed", t.seed},
      {"folds", rc.folds},              {"class_weighting", t.class_weighting},
      {"independent_experts", rc.independent_experts}, {"record_level", rc.record_level},
      {"metric_convention", kMetricConvention},
  };
  return j.dump(2) + "\n";
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------

int cmd_params(const std::vector<std::string>& names, bool all, std::ostream& out) {
  std::vector<std::string> selected = names;
  if (all || selected.empty()) selected = model_names();
  for (const auto& n : selected) (void)model_by_name(n, 2);

  out << "model,family,fc1,dropout,params_2class,params_3class\n";
  for (const auto& n : selected) {
    const ModelConfig two = model_by_name(n, 2);
    const ModelConfig three = model_by_name(n, 3);
    out << n << "," << (two.family() == Family::Pyramid ? "pyramid" : "traditional") << "," << two.fc1_width << ","
        << two.dropout_rate << "," << count_parameters(two) << "," << count_parameters(three) << "\n";
  }
  if (all || names.empty()) {
    const double reduction = 1.0 - double(count_parameters(make_model(Family::Pyramid, 40, 0.0, 2))) /
                                       double(count_parameters(make_model(Family::Traditional, 40, 0.0, 2)));
    out << "# pyramid vs traditional reduction at fc1=40: " << percent(reduction) << "%\n";
  }
  return 0;
}

int cmd_synth(int classes, int records, Seed seed, double noise, const std::string& out_dir, std::ostream& out) {
  SynthesisSpec spec;
  spec.records_per_class = records;
  spec.profiles = default_profiles(classes);
  spec.noise_level = noise;
  spec.seed = seed;
  const auto data = synthesize_dataset(spec);
  write_dataset(data, out_dir);
  out << "wrote " << data.size() << " records (" << classes << " classes x " << records << ") to " << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const ExperimentCase ec = define_case(rc.case_spec);
  const ModelConfig model = resolve_model(rc, ec.num_classes);
  const TrainingConfig training = resolve_training(rc);
  const auto records = load_data(rc);
  std::vector<EegRecord> used;
  for (const auto& r : records)
    if (ec.contains(r.set_label)) used.push_back(r);
  const auto windows = augment_training(used, ec, SchemeSpec::from_id(rc.scheme));

  Stopwatch clock;
  const auto result = train(model, windows, training, [&](const EpochStats& s) {
    out << "epoch " << s.epoch << " loss " << s.loss << " train_acc " << s.train_accuracy << "\n";
  });
  fs::create_directories(rc.out);
  const std::string base = (fs::path(rc.out) / stem("train", rc, ec.name)).string();
  save_checkpoint(result.params, model, base + ".ckpt");
  write_history_csv(result.history, base + "_history.csv");
  write_text(base + ".config.json", config_json(rc, model, training));
  out << "trained on " << windows.size() << " windows in " << clock.seconds() << " s; checkpoint " << base
      << ".ckpt\n";
  return 0;
}

int cmd_cv(const RunConfig& rc, std::ostream& out) {
  const ExperimentCase ec = define_case(rc.case_spec);
  const ModelConfig model = resolve_model(rc, ec.num_classes);
  const TrainingConfig training = resolve_training(rc);
  const SchemeSpec scheme = SchemeSpec::from_id(rc.scheme);
  const ReportFormat format = parse_report_format(rc.format);
  const auto records = load_data(rc);
  const FoldPlan plan = plan_folds(strata_for_case(records, ec), rc.folds, rc.seed);

  fs::create_directories(rc.out);
  const std::string base = (fs::path(rc.out) / stem("cv", rc, ec.name)).string();
  CvOptions options;
  options.jobs = rc.jobs;
  options.independent_experts = rc.independent_experts;
  options.record_level = rc.record_level;
  options.on_model = [&](int fold, int expert, const NetworkParameters<double>& p) {
    char suffix[48];
    std::snprintf(suffix, sizeof suffix, "_fold%02d%s.ckpt", fold,
                  rc.independent_experts ? ("_expert" + std::to_string(expert)).c_str() : "");
    save_checkpoint(p, model, base + suffix);
  };
  options.on_fold = [&](const FoldResult& f) {
    out << "fold " << f.fold << ": acc " << percent(f.acc) << " acc_v " << percent(f.acc_v) << " ties " << f.ties
        << "\n";
  };

  Stopwatch clock;
  CvReport report = run_cv(records, ec, scheme, model, training, plan, options);
  report.run.model = rc.model;

  const std::string ext = format == ReportFormat::Csv ? ".csv" : ".json";
  emit_report(std::span<const CvReport>(&report, 1), base + ext, format);
  if (format == ReportFormat::Csv) write_text(base + ".config.json", config_json(rc, model, training));
  if (rc.vote_log) {
    std::vector<VoteRecord> votes;
    for (const auto& f : report.folds) votes.insert(votes.end(), f.votes.begin(), f.votes.end());
    write_vote_log(votes, base + "_votes.csv");
  }
  out << "case " << ec.name << ": mean acc " << percent(report.mean.acc) << " acc_v " << percent(report.mean.acc_v)
      << " (" << clock.seconds() << " s); report " << base << ext << "\n";
  return 0;
}

int cmd_battery(const RunConfig& rc, const std::vector<std::string>& cases, std::ostream& out) {
  const TrainingConfig training = resolve_training(rc);
  const SchemeSpec scheme = SchemeSpec::from_id(rc.scheme);
  const ReportFormat format = parse_report_format(rc.format);
  const ModelConfig base_model = resolve_model(rc, 2);
  const auto records = load_data(rc);
  const std::vector<std::string>& selected = cases.empty() ? standard_cases() : cases;

  CvOptions options;
  options.jobs = rc.jobs;
  options.keep_votes = false;
  options.independent_experts = rc.independent_experts;
  options.record_level = rc.record_level;
  Stopwatch clock;
  BatteryReport battery =
      run_battery(records, selected, scheme, rc.model, base_model, training, rc.folds, rc.seed, options,
                  [&](const BatteryRow& row) {
                    out << row.case_name << ": acc_v " << percent(row.report.mean.acc_v) << "\n";
                  });

  fs::create_directories(rc.out);
  const std::string base = (fs::path(rc.out) / stem("battery", rc, "")).string();
  if (format == ReportFormat::Csv) {
    write_text(base + ".csv", battery_csv(battery));
    write_text(base + ".config.json", config_json(rc, base_model, training));
  } else {
    std::vector<CvReport> reports;
    for (const auto& row : battery.rows) reports.push_back(row.report);
    emit_report(reports, base + ".json", format);
  }
  write_text(base + "_comparison.csv", battery_comparison_csv(battery));
  out << "battery of " << battery.rows.size() << " cases: mean acc_v " << percent(battery.mean_acc_v) << " ("
      << clock.seconds() << " s); comparison " << base << "_comparison.csv\n";
  return 0;
}

int cmd_predict(const RunConfig& rc, const std::string& checkpoint, const std::string& input, bool case_given,
                std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  std::optional<ExperimentCase> ec;
  if (case_given) {
    ec = define_case(rc.case_spec);
    if (ec->num_classes != ck.config.num_classes)
      throw Error("checkpoint has " + std::to_string(ck.config.num_classes) + " classes but case " + ec->name +
                  " has " + std::to_string(ec->num_classes));
  }
  const SchemeSpec scheme = SchemeSpec::from_id(rc.scheme);
  EegRecord record = load_record(input, 'A', 1);
  auto instances = segment_signal(record, -1, scheme);
  const std::string id = fs::path(input).stem().string();

  out << kVoteLogHeader << "\n";
  for (auto& inst : instances) {
    inst.record_id = id;
    const VoteRecord vr = predict_instance(ck.config, ck.params, inst, scheme);
    out << vote_log_line(vr);
    if (ec) out << "  # " << ec->sets_of_class(vr.final_class);
    out << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pyramidal 1D-CNN EEG epilepsy detection"};
  app.require_subcommand(1);
  RunConfig rc;

  std::vector<std::string> param_models;
  bool params_all = false;
  auto* params = app.add_subcommand("params", "Print learnable parameter counts");
  params->add_option("models", param_models, "Model names (M1..M8)");
  params->add_flag("--all", params_all, "All eight models");

  int synth_classes = 3, synth_records = 20;
  double synth_noise = 0.3;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in Bonn file layout");
  synth->add_option("--classes", synth_classes, "Number of classes (2-5)")->check(CLI::Range(2, 5));
  synth->add_option("--records", synth_records, "Records per class (1-100)")->check(CLI::Range(1, 100));
  synth->add_option("--noise", synth_noise, "White-noise standard deviation")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", rc.seed, "Random seed");
  synth->add_option("--out", rc.out, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train one model on every record of a case");
  add_training_flags(*train_cmd, rc);

  auto* cv = app.add_subcommand("cv", "Cross-validate one case");
  add_training_flags(*cv, rc);
  cv->add_option("--folds", rc.folds, "Number of folds")->check(CLI::Range(2, 100));
  cv->add_option("--jobs", rc.jobs, "Folds run in parallel")->check(CLI::PositiveNumber);
  cv->add_option("--format", rc.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  cv->add_flag("--vote-log", rc.vote_log, "Write per-instance vote log");
  cv->add_flag("--independent-experts", rc.independent_experts, "Train one model per ensemble position");
  cv->add_flag("--record-level", rc.record_level, "Also report record-level voted accuracy (json)");

  std::vector<std::string> battery_cases;
  auto* battery = app.add_subcommand("battery", "Cross-validate the sixteen standard cases");
  add_training_flags(*battery, rc);
  battery->add_option("--folds", rc.folds, "Number of folds")->check(CLI::Range(2, 100));
  battery->add_option("--jobs", rc.jobs, "Folds run in parallel")->check(CLI::PositiveNumber);
  battery->add_option("--format", rc.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  battery->add_option("--cases", battery_cases, "Subset of cases (default: all sixteen)");
  battery->add_flag("--independent-experts", rc.independent_experts, "Train one model per ensemble position");
  battery->add_flag("--record-level", rc.record_level, "Also report record-level voted accuracy (json)");

  std::string checkpoint, input;
  auto* predict = app.add_subcommand("predict", "Classify the four test instances of one record file");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--input", input, "Record file (4097 lines)")->required();
  predict->add_option("--scheme", rc.scheme, "Augmentation scheme")->check(CLI::IsMember({1, 2}));
  auto* predict_case = predict->add_option("--case", rc.case_spec, "Case used to name classes");

  std::vector<std::string> argv_storage{"pyrseiz"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*params) return cmd_params(param_models, params_all, out);
    if (*synth) return cmd_synth(synth_classes, synth_records, rc.seed, synth_noise, rc.out, out);
    if (*train_cmd) return cmd_train(rc, out);
    if (*cv) return cmd_cv(rc, out);
    if (*battery) return cmd_battery(rc, battery_cases, out);
    if (*predict) return cmd_predict(rc, checkpoint, input, predict_case->count() > 0, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace pyrseiz::cli

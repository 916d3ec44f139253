#include "pyrseiz/training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace pyrseiz {

void TrainingConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw Error("batch size must be at least 1");
  if (epochs < 0) throw Error("epochs must be non-negative");
}

Seed derive_seed(Seed base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t { kInitStream = 0, kShuffleStream = 1, kDropoutStream = 2 };

void check_inputs(const ModelConfig& model, std::span<const Window> windows) {
  if (windows.empty()) throw Error("empty training set");
  std::vector<bool> seen(static_cast<std::size_t>(model.num_classes), false);
  for (const auto& w : windows) {
    if (w.values.size() != model.input_length)
      throw Error("training window of length " + std::to_string(w.values.size()) + " for a model expecting " +
                  std::to_string(model.input_length));
    if (w.label < 0 || w.label >= model.num_classes)
      throw Error("window label " + std::to_string(w.label) + " outside the model's " +
                  std::to_string(model.num_classes) + " classes");
    seen[static_cast<std::size_t>(w.label)] = true;
  }
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (!seen[c]) throw Error("no training windows for class " + std::to_string(c));
}

}  // namespace

TrainingResult train(const ModelConfig& model, std::span<const Window> windows, const TrainingConfig& config,
                     const EpochCallback& on_epoch) {
  model.validate();
  return train_from(model, init_parameters<double>(model, derive_seed(config.seed, kInitStream)), windows, config,
                    on_epoch);
}

TrainingResult train_from(const ModelConfig& model, NetworkParameters<double> initial, std::span<const Window> windows,
                          const TrainingConfig& config, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  check_inputs(model, windows);

  TrainingResult result{std::move(initial), {}};
  auto& params = result.params;
  AdamState<double> adam = AdamState<double>::zeros(model);
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng dropout_rng(config.dropout_seed ? *config.dropout_seed : derive_seed(config.seed, kDropoutStream));

  const std::size_t n = windows.size();
  std::vector<double> class_weight(static_cast<std::size_t>(model.num_classes), 1.0);
  if (config.class_weighting) {
    std::vector<std::size_t> counts(class_weight.size(), 0);
    for (const auto& w : windows) ++counts[static_cast<std::size_t>(w.label)];
    for (std::size_t c = 0; c < counts.size(); ++c)
      class_weight[c] = double(n) / (double(model.num_classes) * double(counts[c]));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  Matrix<double> inputs(model.input_length, static_cast<Index>(batch));
  std::vector<int> labels;
  std::vector<double> weights;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      inputs.resize(model.input_length, static_cast<Index>(count));
      labels.resize(count);
      weights.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const Window& w = windows[order[start + i]];
        inputs.col(static_cast<Index>(i)) = w.values;
        labels[i] = w.label;
        weights[i] = class_weight[static_cast<std::size_t>(w.label)];
      }
      const auto trace = forward_training(model, params, inputs, dropout_rng);
      const auto lg = backward<double>(model, params, trace, labels,
                                       config.class_weighting ? std::span<const double>(weights)
                                                              : std::span<const double>());
      adam_step(params, lg.gradient, adam, config.adam);

      loss_sum += lg.loss * double(count);
      for (std::size_t i = 0; i < count; ++i) {
        Index predicted = 0;
        trace.probabilities.col(static_cast<Index>(i)).maxCoeff(&predicted);
        if (predicted == labels[i]) ++correct;
      }
    }
    EpochStats stats{epoch, loss_sum / double(n), double(correct) / double(n)};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void write_history_csv(std::span<const EpochStats> history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,loss,train_acc\n";
  char buf[96];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", h.epoch, h.loss, h.train_accuracy);
    out << buf;
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace pyrseiz

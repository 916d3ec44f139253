#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pyrseiz/adam.hpp"
#include "pyrseiz/windowing.hpp"

namespace pyrseiz {

struct TrainingConfig {
  AdamHyper adam;
  Index batch_size = 32;
  int epochs = 50;
  Seed seed = 1;
  bool shuffle = true;
  // Mask stream for dropout; derived from `seed` when unset.
  std::optional<Seed> dropout_seed;
  // Inverse-frequency loss weights per class.
  bool class_weighting = false;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainingResult {
  NetworkParameters<double> params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Independent stream seed derived from a base seed (splitmix64 finalizer).
Seed derive_seed(Seed base, std::uint64_t stream);

/// Mini-batch Adam on softmax cross-entropy. Deterministic per (config, windows).
TrainingResult train(const ModelConfig& model, std::span<const Window> windows, const TrainingConfig& config,
                     const EpochCallback& on_epoch = {});

/// Same as train() but starting from given parameters.
TrainingResult train_from(const ModelConfig& model, NetworkParameters<double> initial, std::span<const Window> windows,
                          const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// CSV with columns epoch,loss,train_acc.
void write_history_csv(std::span<const EpochStats> history, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "p1dcnn-v1";

struct Checkpoint {
  ModelConfig config;
  NetworkParameters<double> params;
};

void save_checkpoint(const NetworkParameters<double>& params, const ModelConfig& config,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pyrseiz

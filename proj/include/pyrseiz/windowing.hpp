#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pyrseiz/dataset.hpp"

namespace pyrseiz {

inline constexpr Index kWindowLength = 512;
inline constexpr Index kTestInstanceLength = 1024;
inline constexpr Index kInstancesPerRecord = 4;
inline constexpr double kNormalizeEpsilon = 1e-8;

struct WindowOrigin {
  std::string record_id;
  Index offset = 0;  // in samples, relative to the record start
};

struct Window {
  Vector<double> values;
  int label = 0;
  WindowOrigin origin;
};

/// The n windows of one 1024-sample test sub-signal.
struct TestInstance {
  std::vector<Window> windows;
  int label = 0;
  std::string record_id;
  int subsignal = 0;  // 0..3
};

/// Augmentation scheme: training stride plus test-window stride.
struct SchemeSpec {
  int id = 1;
  Index train_stride = 64;
  Index test_window_stride = 256;
  Index window = kWindowLength;
  Index test_instance_length = kTestInstanceLength;

  static SchemeSpec scheme1() { return {1, 64, 256}; }
  static SchemeSpec scheme2() { return {2, 128, 128}; }
  static SchemeSpec from_id(int id);

  /// Ensemble width: windows per test instance.
  Index ensemble_width() const;
  void validate() const;
};

/// floor((signal_length - window) / stride) + 1.
Index count_windows(Index signal_length, Index window, Index stride);

/// (x - mean) / max(std, 1e-8) with the population standard deviation.
Vector<double> normalize(const Eigen::Ref<const Vector<double>>& values);

/// Sliding windows over every record, each normalized on its own, labelled
/// through the case. Records from sets outside the case are rejected.
std::vector<Window> augment_training(std::span<const EegRecord> records, const ExperimentCase& ec,
                                     const SchemeSpec& scheme);

/// Four sub-signals at 0, 1024, 2048, 3072, each split into the scheme's
/// ensemble width of normalized windows. Trailing samples are discarded.
std::vector<TestInstance> segment_testing(const EegRecord& record, const ExperimentCase& ec, const SchemeSpec& scheme);

/// Test segmentation for a signal of unknown class; instances carry `label`.
std::vector<TestInstance> segment_signal(const EegRecord& record, int label, const SchemeSpec& scheme);

/// Debug dump: one window per line, comma-separated values.
void write_windows_text(std::span<const Window> windows, const std::filesystem::path& path);

/// Packs window values column-wise into a (window x count) matrix.
Matrix<double> stack_windows(std::span<const Window> windows);

}  // namespace pyrseiz

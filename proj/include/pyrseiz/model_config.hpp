#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pyrseiz/types.hpp"

namespace pyrseiz {

enum class Family { Traditional, Pyramid };

/// Architecture of one network: three Conv-BN-ReLU blocks, FC1-ReLU-Dropout, FC2.
struct ModelConfig {
  std::array<Index, 3> kernel_counts{24, 16, 8};
  std::array<Index, 3> receptive_fields{5, 3, 3};
  std::array<Index, 3> strides{3, 2, 2};
  Index fc1_width = 20;
  double dropout_rate = 0.5;
  Index num_classes = 2;
  Index input_length = 512;

  /// Output length of each conv block. Throws when a layer would be empty.
  std::array<Index, 3> layer_lengths() const;
  Index flatten_width() const;
  void validate() const;

  /// Pyramid when kernel counts strictly decrease, traditional when they
  /// strictly increase, nothing otherwise.
  std::optional<Family> family() const;

  bool operator==(const ModelConfig&) const = default;
};

ModelConfig make_model(Family family, Index fc1_width, double dropout_rate, Index num_classes);

/// M1-M4 traditional, M5-M8 pyramid; within a family the order is
/// (FC1=20, DO=0), (20, 0.5), (40, 0), (40, 0.5), except that M5 is the
/// pyramid/20/0.5 network and M6 the pyramid/20/0 one.
ModelConfig model_by_name(std::string_view name, Index num_classes);
const std::vector<std::string>& model_names();

/// Learnable parameter count: conv kernels and biases plus dense weights and
/// biases. Batch-norm running statistics are not learnable and excluded.
Index count_parameters(const ModelConfig& config);

std::string describe(const ModelConfig& config);

}  // namespace pyrseiz

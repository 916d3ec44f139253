#include "pyrseiz/model_config.hpp"

#include <sstream>

#include "pyrseiz/layers.hpp"

namespace pyrseiz {

std::array<Index, 3> ModelConfig::layer_lengths() const {
  std::array<Index, 3> lengths{};
  Index length = input_length;
  for (std::size_t i = 0; i < 3; ++i) {
    length = conv_output_length(length, receptive_fields[i], strides[i]);
    lengths[i] = length;
  }
  return lengths;
}

Index ModelConfig::flatten_width() const { return kernel_counts[2] * layer_lengths()[2]; }

void ModelConfig::validate() const {
  for (std::size_t i = 0; i < 3; ++i)
    if (kernel_counts[i] < 1) throw Error("kernel counts must be positive");
  if (fc1_width < 1) throw Error("fc1 width must be positive");
  if (num_classes < 2) throw Error("at least two classes are required");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  if (input_length < 1) throw Error("input length must be positive");
  (void)layer_lengths();
}

std::optional<Family> ModelConfig::family() const {
  const auto& k = kernel_counts;
  if (k[0] > k[1] && k[1] > k[2]) return Family::Pyramid;
  if (k[0] < k[1] && k[1] < k[2]) return Family::Traditional;
  return std::nullopt;
}

ModelConfig make_model(Family family, Index fc1_width, double dropout_rate, Index num_classes) {
  ModelConfig c;
  c.kernel_counts = family == Family::Pyramid ? std::array<Index, 3>{24, 16, 8} : std::array<Index, 3>{8, 16, 24};
  c.fc1_width = fc1_width;
  c.dropout_rate = dropout_rate;
  c.num_classes = num_classes;
  c.validate();
  return c;
}

namespace {

struct GridEntry {
  Family family;
  Index fc1;
  double dropout;
};

constexpr std::array<GridEntry, 8> kGrid{{
    {Family::Traditional, 20, 0.0},
    {Family::Traditional, 20, 0.5},
    {Family::Traditional, 40, 0.0},
    {Family::Traditional, 40, 0.5},
    {Family::Pyramid, 20, 0.5},  // M5, the selected model, carries dropout
    {Family::Pyramid, 20, 0.0},
    {Family::Pyramid, 40, 0.0},
    {Family::Pyramid, 40, 0.5},
}};

}  // namespace

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"};
  return names;
}

ModelConfig model_by_name(std::string_view name, Index num_classes) {
  const auto& names = model_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      const auto& g = kGrid[i];
      return make_model(g.family, g.fc1, g.dropout, num_classes);
    }
  }
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw Error("unknown model '" + std::string(name) + "' (valid: " + valid + ")");
}

Index count_parameters(const ModelConfig& config) {
  config.validate();
  Index total = 0;
  Index channels = 1;
  for (std::size_t i = 0; i < 3; ++i) {
    const Index k = config.kernel_counts[i];
    total += k * channels * config.receptive_fields[i] + k;
    channels = k;
  }
  total += config.flatten_width() * config.fc1_width + config.fc1_width;
  total += config.fc1_width * config.num_classes + config.num_classes;
  return total;
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "K=(" << c.kernel_counts[0] << "," << c.kernel_counts[1] << "," << c.kernel_counts[2] << ") Rf=("
     << c.receptive_fields[0] << "," << c.receptive_fields[1] << "," << c.receptive_fields[2] << ") stride=("
     << c.strides[0] << "," << c.strides[1] << "," << c.strides[2] << ") fc1=" << c.fc1_width
     << " dropout=" << c.dropout_rate << " classes=" << c.num_classes << " input=" << c.input_length;
  return os.str();
}

}  // namespace pyrseiz

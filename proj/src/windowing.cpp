#include "pyrseiz/windowing.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pyrseiz {

SchemeSpec SchemeSpec::from_id(int id) {
  if (id == 1) return scheme1();
  if (id == 2) return scheme2();
  throw Error("unknown scheme " + std::to_string(id) + " (valid: 1, 2)");
}

Index SchemeSpec::ensemble_width() const {
  return count_windows(test_instance_length, window, test_window_stride);
}

void SchemeSpec::validate() const {
  if (window < 1 || train_stride < 1 || test_window_stride < 1) throw Error("scheme strides must be positive");
  if (test_instance_length < window) throw Error("test instance shorter than window");
}

Index count_windows(Index signal_length, Index window, Index stride) {
  if (stride < 1) throw Error("stride must be >= 1");
  if (window < 1) throw Error("window must be >= 1");
  if (window > signal_length)
    throw Error("window " + std::to_string(window) + " longer than signal " + std::to_string(signal_length));
  return (signal_length - window) / stride + 1;
}

Vector<double> normalize(const Eigen::Ref<const Vector<double>>& values) {
  if (values.size() == 0) throw Error("normalize: empty input");
  const double pivot = values(0);
  const double mean = pivot + (values.array() - pivot).mean();
  const double variance = (values.array() - mean).square().mean();
  const double scale = std::max(std::sqrt(variance), kNormalizeEpsilon);
  return ((values.array() - mean) / scale).matrix();
}

std::vector<Window> augment_training(std::span<const EegRecord> records, const ExperimentCase& ec,
                                     const SchemeSpec& scheme) {
  scheme.validate();
  std::vector<Window> out;
  for (const auto& r : records) {
    if (!ec.contains(r.set_label))
      throw Error("record " + r.id() + " belongs to set " + std::string(1, r.set_label) + ", not mapped by case " +
                  ec.name);
    const int label = ec.class_of(r.set_label);
    const Index n = count_windows(r.samples.size(), scheme.window, scheme.train_stride);
    const std::string id = r.id();
    for (Index w = 0; w < n; ++w) {
      const Index offset = w * scheme.train_stride;
      out.push_back({normalize(r.samples.segment(offset, scheme.window)), label, {id, offset}});
    }
  }
  return out;
}

std::vector<TestInstance> segment_testing(const EegRecord& record, const ExperimentCase& ec, const SchemeSpec& scheme) {
  return segment_signal(record, ec.class_of(record.set_label), scheme);
}

std::vector<TestInstance> segment_signal(const EegRecord& record, int label, const SchemeSpec& scheme) {
  scheme.validate();
  const Index needed = kInstancesPerRecord * scheme.test_instance_length;
  if (record.samples.size() < needed)
    throw Error("record " + record.id() + " has " + std::to_string(record.samples.size()) + " samples, " +
                std::to_string(needed) + " needed for test segmentation");
  const Index width = scheme.ensemble_width();
  const std::string id = record.id();

  std::vector<TestInstance> instances(kInstancesPerRecord);
  for (Index s = 0; s < kInstancesPerRecord; ++s) {
    auto& inst = instances[s];
    inst.label = label;
    inst.record_id = id;
    inst.subsignal = static_cast<int>(s);
    for (Index w = 0; w < width; ++w) {
      const Index offset = s * scheme.test_instance_length + w * scheme.test_window_stride;
      inst.windows.push_back({normalize(record.samples.segment(offset, scheme.window)), label, {id, offset}});
    }
  }
  return instances;
}

void write_windows_text(std::span<const Window> windows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  char buf[32];
  for (const auto& w : windows) {
    for (Index i = 0; i < w.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", w.values(i));
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

Matrix<double> stack_windows(std::span<const Window> windows) {
  if (windows.empty()) return {};
  Matrix<double> m(windows.front().values.size(), static_cast<Index>(windows.size()));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].values.size() != m.rows()) throw Error("windows of differing lengths");
    m.col(static_cast<Index>(i)) = windows[i].values;
  }
  return m;
}

}  // namespace pyrseiz

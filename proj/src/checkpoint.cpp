#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pyrseiz/training.hpp"

namespace pyrseiz {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TensorSlot {
  std::string name;
  std::vector<Index> dims;
  // Row-major view into the parameter storage.
  std::function<double&(Index)> at;
  Index size() const {
    Index n = 1;
    for (Index d : dims) n *= d;
    return n;
  }
};

template <typename Params>
std::vector<TensorSlot> slots(Params& p, const ModelConfig& config) {
  std::vector<TensorSlot> s;
  Index channels = 1;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string layer = std::to_string(i + 1);
    auto& k = p.conv[i].kernels;
    const Index row_width = k.cols();
    s.push_back({"conv" + layer + ".kernels",
                 {config.kernel_counts[i], channels, config.receptive_fields[i]},
                 [&k, row_width](Index n) -> double& { return k(n / row_width, n % row_width); }});
    auto& b = p.conv[i].bias;
    s.push_back({"conv" + layer + ".bias", {config.kernel_counts[i]}, [&b](Index n) -> double& { return b(n); }});
    channels = config.kernel_counts[i];
  }
  auto dense = [&s](const std::string& name, auto& layer) {
    auto& w = layer.weights;
    const Index cols = w.cols();
    s.push_back({name + ".weights", {w.rows(), w.cols()}, [&w, cols](Index n) -> double& { return w(n / cols, n % cols); }});
    auto& b = layer.bias;
    s.push_back({name + ".bias", {b.size()}, [&b](Index n) -> double& { return b(n); }});
  };
  dense("fc1", p.fc1);
  dense("fc2", p.fc2);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string layer = std::to_string(i + 1);
    auto& m = p.norm[i].mean;
    auto& v = p.norm[i].variance;
    s.push_back({"bn" + layer + ".running_mean", {m.size()}, [&m](Index n) -> double& { return m(n); }});
    s.push_back({"bn" + layer + ".running_var", {v.size()}, [&v](Index n) -> double& { return v(n); }});
  }
  return s;
}

std::string config_line(const ModelConfig& c) {
  std::ostringstream os;
  os << "config kernel_counts " << c.kernel_counts[0] << ' ' << c.kernel_counts[1] << ' ' << c.kernel_counts[2]
     << " receptive_fields " << c.receptive_fields[0] << ' ' << c.receptive_fields[1] << ' ' << c.receptive_fields[2]
     << " strides " << c.strides[0] << ' ' << c.strides[1] << ' ' << c.strides[2] << " fc1_width " << c.fc1_width
     << " dropout_rate " << format_double(c.dropout_rate) << " num_classes " << c.num_classes << " input_length "
     << c.input_length;
  return os.str();
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw Error("checkpoint " + path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const NetworkParameters<double>& params, const ModelConfig& config,
                     const std::filesystem::path& path) {
  config.validate();
  auto copy = params;
  auto tensors = slots(copy, config);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << '\n' << config_line(config) << '\n';
  for (auto& t : tensors) {
    out << "tensor " << t.name;
    for (Index d : t.dims) out << ' ' << d;
    out << '\n';
    for (Index n = 0; n < t.size(); ++n) out << (n ? " " : "") << format_double(t.at(n));
    out << '\n';
  }
  out << "bn_tracked";
  for (const auto& s : params.norm) out << ' ' << (s.tracked ? 1 : 0);
  out << "\nend\n";
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) corrupt(path, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCheckpointMagic) corrupt(path, "unsupported version header '" + line + "'");

  Checkpoint ck;
  {
    if (!std::getline(in, line)) corrupt(path, "missing config line");
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word != "config") corrupt(path, "missing config line");
    auto& c = ck.config;
    auto expect = [&](const char* key) {
      if (!(is >> word) || word != key) corrupt(path, std::string("config field '") + key + "' missing");
    };
    expect("kernel_counts");
    is >> c.kernel_counts[0] >> c.kernel_counts[1] >> c.kernel_counts[2];
    expect("receptive_fields");
    is >> c.receptive_fields[0] >> c.receptive_fields[1] >> c.receptive_fields[2];
    expect("strides");
    is >> c.strides[0] >> c.strides[1] >> c.strides[2];
    expect("fc1_width");
    is >> c.fc1_width;
    expect("dropout_rate");
    is >> c.dropout_rate;
    expect("num_classes");
    is >> c.num_classes;
    expect("input_length");
    is >> c.input_length;
    if (!is) corrupt(path, "malformed config line");
    try {
      c.validate();
    } catch (const Error& e) {
      corrupt(path, e.what());
    }
  }

  ck.params = NetworkParameters<double>::zeros(ck.config);
  auto tensors = slots(ck.params, ck.config);
  for (auto& t : tensors) {
    if (!std::getline(in, line)) corrupt(path, "truncated before tensor " + t.name);
    std::istringstream header(line);
    std::string word, name;
    header >> word >> name;
    if (word != "tensor" || name != t.name) corrupt(path, "expected tensor " + t.name);
    std::vector<Index> dims;
    for (Index d; header >> d;) dims.push_back(d);
    if (dims != t.dims) corrupt(path, "shape mismatch for tensor " + t.name);

    if (!std::getline(in, line)) corrupt(path, "truncated values for tensor " + t.name);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (Index n = 0; n < t.size(); ++n) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) corrupt(path, "tensor " + t.name + " has too few or malformed values");
      t.at(n) = v;
      p = next;
    }
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p != end) corrupt(path, "tensor " + t.name + " has extra values");
  }

  if (!std::getline(in, line)) corrupt(path, "truncated before bn_tracked");
  {
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word != "bn_tracked") corrupt(path, "missing bn_tracked line");
    for (auto& s : ck.params.norm) {
      int flag = -1;
      if (!(is >> flag) || (flag != 0 && flag != 1)) corrupt(path, "malformed bn_tracked line");
      s.tracked = flag == 1;
    }
  }
  if (!std::getline(in, line) || (line != "end" && line != "end\r")) corrupt(path, "missing end marker");
  for (const auto& s : ck.params.norm)
    if ((s.variance.array() <= 0.0).any()) corrupt(path, "non-positive running variance");
  return ck;
}

}  // namespace pyrseiz

#pragma once

// Whole-network forward and backward passes over a batch of windows.
//
// Windows are passed as an (input_length x batch) matrix, one window per
// column. Probabilities come back as (num_classes x batch).

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pyrseiz/layers.hpp"
#include "pyrseiz/model_config.hpp"

namespace pyrseiz {

template <typename Scalar>
struct ConvParameters {
  Matrix<Scalar> kernels;  // K x (c_in * rf)
  Vector<Scalar> bias;
};

template <typename Scalar>
struct DenseParameters {
  Matrix<Scalar> weights;  // out x in
  Vector<Scalar> bias;
};

template <typename Scalar>
struct NetworkParameters {
  std::array<ConvParameters<Scalar>, 3> conv;
  std::array<BatchNormStats<Scalar>, 3> norm;
  DenseParameters<Scalar> fc1;
  DenseParameters<Scalar> fc2;

  static NetworkParameters zeros(const ModelConfig& config) {
    config.validate();
    NetworkParameters p;
    Index channels = 1;
    for (std::size_t i = 0; i < 3; ++i) {
      const Index k = config.kernel_counts[i];
      p.conv[i].kernels = Matrix<Scalar>::Zero(k, channels * config.receptive_fields[i]);
      p.conv[i].bias = Vector<Scalar>::Zero(k);
      p.norm[i] = BatchNormStats<Scalar>::initial(k);
      channels = k;
    }
    p.fc1.weights = Matrix<Scalar>::Zero(config.fc1_width, config.flatten_width());
    p.fc1.bias = Vector<Scalar>::Zero(config.fc1_width);
    p.fc2.weights = Matrix<Scalar>::Zero(config.num_classes, config.fc1_width);
    p.fc2.bias = Vector<Scalar>::Zero(config.num_classes);
    return p;
  }

  /// Flat views of every learnable tensor, in the order of learnable_names().
  std::vector<Eigen::Map<Vector<Scalar>>> learnable() {
    std::vector<Eigen::Map<Vector<Scalar>>> v;
    auto add = [&v](auto& t) { v.emplace_back(t.data(), t.size()); };
    for (auto& c : conv) {
      add(c.kernels);
      add(c.bias);
    }
    add(fc1.weights);
    add(fc1.bias);
    add(fc2.weights);
    add(fc2.bias);
    return v;
  }

  std::vector<Eigen::Map<const Vector<Scalar>>> learnable() const {
    std::vector<Eigen::Map<const Vector<Scalar>>> v;
    auto add = [&v](const auto& t) { v.emplace_back(t.data(), t.size()); };
    for (const auto& c : conv) {
      add(c.kernels);
      add(c.bias);
    }
    add(fc1.weights);
    add(fc1.bias);
    add(fc2.weights);
    add(fc2.bias);
    return v;
  }

  static const std::vector<std::string>& learnable_names() {
    static const std::vector<std::string> names{"conv1.kernels", "conv1.bias", "conv2.kernels", "conv2.bias",
                                                "conv3.kernels", "conv3.bias", "fc1.weights",   "fc1.bias",
                                                "fc2.weights",   "fc2.bias"};
    return names;
  }

  Index learnable_size() const {
    Index n = 0;
    for (const auto& t : learnable()) n += t.size();
    return n;
  }

  bool operator==(const NetworkParameters& o) const {
    auto a = learnable();
    auto b = o.learnable();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].size() != b[i].size() || a[i] != b[i]) return false;
    for (std::size_t i = 0; i < 3; ++i)
      if (norm[i].mean != o.norm[i].mean || norm[i].variance != o.norm[i].variance ||
          norm[i].tracked != o.norm[i].tracked)
        return false;
    return true;
  }
};

/// He-normal weights (std sqrt(2 / fan_in)), zero biases, running stats (0, 1).
template <typename Scalar>
NetworkParameters<Scalar> init_parameters(const ModelConfig& config, Seed seed) {
  auto p = NetworkParameters<Scalar>::zeros(config);
  Rng rng(seed);
  auto fill = [&rng](Matrix<Scalar>& w) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
  };
  for (auto& c : p.conv) fill(c.kernels);
  fill(p.fc1.weights);
  fill(p.fc2.weights);
  return p;
}

/// Everything the backward pass needs from a training-mode forward pass.
template <typename Scalar>
struct ForwardTrace {
  Mode mode = Mode::Training;
  std::array<ConvCache<Scalar>, 3> conv;
  std::array<BatchNormCache<Scalar>, 3> norm;
  std::array<Matrix<Scalar>, 3> relu_input;  // batch-norm outputs
  std::array<Index, 3> lengths{};
  Matrix<Scalar> flattened;    // flatten_width x B
  Matrix<Scalar> fc1_pre;      // fc1_width x B
  Matrix<Scalar> fc2_input;    // after ReLU and dropout
  Matrix<Scalar> dropout_mask;
  Matrix<Scalar> logits;
  Matrix<Scalar> probabilities;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> flatten(const SignalBatch<Scalar>& s) {
  const Index c = s.channels(), len = s.length, batch = s.batch();
  Matrix<Scalar> out(c * len, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index d = 0; d < c; ++d) out.col(b).segment(d * len, len) = s.data.row(d).segment(b * len, len).transpose();
  return out;
}

template <typename Scalar>
SignalBatch<Scalar> unflatten(const Matrix<Scalar>& flat, Index channels, Index length) {
  const Index batch = flat.cols();
  SignalBatch<Scalar> s{Matrix<Scalar>(channels, length * batch), length};
  for (Index b = 0; b < batch; ++b)
    for (Index d = 0; d < channels; ++d)
      s.data.row(d).segment(b * length, length) = flat.col(b).segment(d * length, length).transpose();
  return s;
}

template <typename Scalar>
SignalBatch<Scalar> as_signal(const Matrix<Scalar>& windows, Index input_length) {
  if (windows.rows() != input_length)
    throw Error("window length " + std::to_string(windows.rows()) + " does not match model input length " +
                std::to_string(input_length));
  return {Eigen::Map<const Matrix<Scalar>>(windows.data(), 1, windows.size()), input_length};
}

template <typename Scalar>
Matrix<Scalar> softmax_columns(const Matrix<Scalar>& logits) {
  Matrix<Scalar> p(logits.rows(), logits.cols());
  for (Index b = 0; b < logits.cols(); ++b) p.col(b) = softmax(logits.col(b));
  return p;
}

}  // namespace detail

/// Inference pass: running batch-norm statistics, no dropout. Windows are
/// evaluated one at a time so each column of the result is bitwise
/// independent of the rest of the batch.
template <typename Scalar>
Matrix<Scalar> forward_inference(const ModelConfig& config, const NetworkParameters<Scalar>& params,
                                 const Matrix<Scalar>& windows) {
  if (windows.rows() != config.input_length)
    throw Error("window length " + std::to_string(windows.rows()) + " does not match model input length " +
                std::to_string(config.input_length));
  Matrix<Scalar> probs(config.num_classes, windows.cols());
  for (Index b = 0; b < windows.cols(); ++b) {
    SignalBatch<Scalar> x{windows.col(b).transpose(), config.input_length};
    for (std::size_t i = 0; i < 3; ++i) {
      x = conv1d_forward(x, params.conv[i].kernels, params.conv[i].bias, config.receptive_fields[i],
                         config.strides[i]);
      x = batchnorm_infer(x, params.norm[i]);
      x.data = relu(x.data);
    }
    const Matrix<Scalar> hidden = relu(dense_forward(detail::flatten(x), params.fc1.weights, params.fc1.bias));
    const Matrix<Scalar> logits = dense_forward<Scalar>(hidden, params.fc2.weights, params.fc2.bias);
    probs.col(b) = softmax(logits.col(0));
  }
  return probs;
}

/// Training pass: batch statistics (running stats updated in `params`) and a
/// dropout mask drawn from `rng`.
template <typename Scalar>
ForwardTrace<Scalar> forward_training(const ModelConfig& config, NetworkParameters<Scalar>& params,
                                      const Matrix<Scalar>& windows, Rng& rng) {
  if (windows.cols() == 0) throw Error("forward: empty batch");
  ForwardTrace<Scalar> t;
  SignalBatch<Scalar> x = detail::as_signal(windows, config.input_length);
  for (std::size_t i = 0; i < 3; ++i) {
    x = conv1d_forward(x, params.conv[i].kernels, params.conv[i].bias, config.receptive_fields[i], config.strides[i],
                       &t.conv[i]);
    x = batchnorm_train(x, params.norm[i], &t.norm[i]);
    t.relu_input[i] = x.data;
    t.lengths[i] = x.length;
    x.data = relu(x.data);
  }
  t.flattened = detail::flatten(x);
  t.fc1_pre = dense_forward(t.flattened, params.fc1.weights, params.fc1.bias);
  t.dropout_mask = dropout_mask<Scalar>(t.fc1_pre.rows(), t.fc1_pre.cols(), config.dropout_rate, rng);
  t.fc2_input = relu(t.fc1_pre).cwiseProduct(t.dropout_mask);
  t.logits = dense_forward(t.fc2_input, params.fc2.weights, params.fc2.bias);
  t.probabilities = detail::softmax_columns(t.logits);
  return t;
}

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> probabilities;
  std::optional<ForwardTrace<Scalar>> trace;
};

template <typename Scalar>
ForwardResult<Scalar> forward(const ModelConfig& config, NetworkParameters<Scalar>& params,
                              const Matrix<Scalar>& windows, Mode mode, Rng& rng) {
  if (mode == Mode::Inference) return {forward_inference(config, params, windows), std::nullopt};
  auto trace = forward_training(config, params, windows, rng);
  Matrix<Scalar> probs = trace.probabilities;
  return {std::move(probs), std::move(trace)};
}

template <typename Scalar>
struct LossGradient {
  Scalar loss = 0;
  NetworkParameters<Scalar> gradient;
};

/// Cross-entropy averaged over the batch (weighted when `sample_weights` is
/// non-empty) and its gradient with respect to every learnable tensor.
template <typename Scalar>
LossGradient<Scalar> backward(const ModelConfig& config, const NetworkParameters<Scalar>& params,
                              const ForwardTrace<Scalar>& trace, std::span<const int> labels,
                              std::span<const Scalar> sample_weights = {}) {
  if (trace.mode != Mode::Training) throw Error("backward requires a training-mode trace");
  const Index batch = trace.logits.cols();
  if (static_cast<Index>(labels.size()) != batch) throw Error("backward: label count does not match batch");
  if (!sample_weights.empty() && static_cast<Index>(sample_weights.size()) != batch)
    throw Error("backward: weight count does not match batch");

  Scalar weight_total = 0;
  for (Index b = 0; b < batch; ++b) weight_total += sample_weights.empty() ? Scalar(1) : sample_weights[b];

  LossGradient<Scalar> out;
  out.gradient = NetworkParameters<Scalar>::zeros(config);
  auto& g = out.gradient;

  Matrix<Scalar> grad_logits(trace.logits.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const auto sl = softmax_cross_entropy(trace.logits.col(b), labels[b]);
    const Scalar w = (sample_weights.empty() ? Scalar(1) : sample_weights[b]) / weight_total;
    out.loss += w * sl.loss;
    grad_logits.col(b) = w * sl.gradient;
  }

  auto fc2 = dense_backward(trace.fc2_input, params.fc2.weights, grad_logits);
  g.fc2.weights = std::move(fc2.weights);
  g.fc2.bias = std::move(fc2.bias);

  const Matrix<Scalar> grad_hidden = relu_backward<Scalar>(trace.fc1_pre, fc2.input.cwiseProduct(trace.dropout_mask));
  auto fc1 = dense_backward(trace.flattened, params.fc1.weights, grad_hidden);
  g.fc1.weights = std::move(fc1.weights);
  g.fc1.bias = std::move(fc1.bias);

  SignalBatch<Scalar> grad = detail::unflatten(fc1.input, config.kernel_counts[2], trace.lengths[2]);
  for (std::size_t r = 3; r-- > 0;) {
    grad.data = relu_backward<Scalar>(trace.relu_input[r], grad.data);
    grad = batchnorm_backward(trace.norm[r], grad);
    auto cg = conv1d_backward(trace.conv[r], params.conv[r].kernels, grad, r > 0);
    g.conv[r].kernels = std::move(cg.kernels);
    g.conv[r].bias = std::move(cg.bias);
    grad = std::move(cg.input);
  }
  return out;
}

/// Loss of a training-mode pass with a dropout mask drawn from `dropout_seed`.
/// Used by gradient checks; running statistics are left untouched.
template <typename Scalar>
Scalar training_loss(const ModelConfig& config, const NetworkParameters<Scalar>& params,
                     const Matrix<Scalar>& windows, std::span<const int> labels, Seed dropout_seed) {
  NetworkParameters<Scalar> scratch = params;
  Rng rng(dropout_seed);
  const auto trace = forward_training(config, scratch, windows, rng);
  Scalar loss = 0;
  for (Index b = 0; b < trace.logits.cols(); ++b) loss += softmax_cross_entropy(trace.logits.col(b), labels[b]).loss;
  return loss / static_cast<Scalar>(trace.logits.cols());
}

}  // namespace pyrseiz

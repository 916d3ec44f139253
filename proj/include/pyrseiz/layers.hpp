#pragma once

// Layer primitives of the pyramidal 1D-CNN: strided valid convolution, batch
// normalization without affine terms, ReLU, dense, inverted dropout and
// softmax cross-entropy. Every forward op that participates in training can
// fill a cache consumed by the matching backward op.
//
// Multi-channel signals travel as a SignalBatch: one matrix with a row per
// channel, samples laid side by side along the columns.

#include <cmath>
#include <random>
#include <string>

#include "pyrseiz/types.hpp"

namespace pyrseiz {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Number of valid positions of a window of `receptive_field` moved by `stride`.
inline Index conv_output_length(Index input_length, Index receptive_field, Index stride) {
  if (stride < 1) throw Error("stride must be >= 1");
  if (receptive_field < 1) throw Error("receptive field must be >= 1");
  if (input_length < receptive_field)
    throw Error("input length " + std::to_string(input_length) + " shorter than receptive field " +
                std::to_string(receptive_field));
  return (input_length - receptive_field) / stride + 1;
}

template <typename Scalar>
struct SignalBatch {
  /// channels x (length * batch); sample b owns columns [b*length, (b+1)*length).
  Matrix<Scalar> data;
  Index length = 0;

  Index channels() const { return data.rows(); }
  Index batch() const { return length == 0 ? 0 : data.cols() / length; }

  auto sample(Index b) const { return data.middleCols(b * length, length); }
};

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ConvCache {
  Matrix<Scalar> columns;  // (c_in * rf) x (out_length * batch)
  Index input_length = 0;
  Index input_channels = 0;
  Index receptive_field = 0;
  Index stride = 1;
};

template <typename Scalar>
struct ConvGradients {
  SignalBatch<Scalar> input;
  Matrix<Scalar> kernels;
  Vector<Scalar> bias;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> im2col(const SignalBatch<Scalar>& in, Index rf, Index stride, Index out_length) {
  const Index c = in.channels();
  const Index batch = in.batch();
  Matrix<Scalar> cols(c * rf, out_length * batch);
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < out_length; ++j) {
      const Index col = b * out_length + j;
      const Index start = b * in.length + j * stride;
      for (Index d = 0; d < c; ++d)
        for (Index e = 0; e < rf; ++e) cols(d * rf + e, col) = in.data(d, start + e);
    }
  }
  return cols;
}

template <typename Scalar>
SignalBatch<Scalar> col2im(const Matrix<Scalar>& cols, const ConvCache<Scalar>& cache, Index out_length) {
  const Index rf = cache.receptive_field;
  const Index batch = cols.cols() / out_length;
  SignalBatch<Scalar> grad{Matrix<Scalar>::Zero(cache.input_channels, cache.input_length * batch),
                           cache.input_length};
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < out_length; ++j) {
      const Index col = b * out_length + j;
      const Index start = b * cache.input_length + j * cache.stride;
      for (Index d = 0; d < cache.input_channels; ++d)
        for (Index e = 0; e < rf; ++e) grad.data(d, start + e) += cols(d * rf + e, col);
    }
  }
  return grad;
}

}  // namespace detail

/// Valid strided cross-correlation. `kernels` is K x (c_in * rf), entry
/// (l, d*rf + e) weighting channel d at tap e.
///   out[l][j] = bias[l] + sum_d sum_e kernels[l][d][e] * in[d][j*stride + e]
template <typename Scalar>
SignalBatch<Scalar> conv1d_forward(const SignalBatch<Scalar>& input, const Matrix<Scalar>& kernels,
                                   const Vector<Scalar>& bias, Index receptive_field, Index stride,
                                   ConvCache<Scalar>* cache = nullptr) {
  if (kernels.cols() != input.channels() * receptive_field)
    throw Error("conv1d: kernel depth does not match input channels");
  if (bias.size() != kernels.rows()) throw Error("conv1d: bias size does not match kernel count");
  const Index out_length = conv_output_length(input.length, receptive_field, stride);
  Matrix<Scalar> cols = detail::im2col(input, receptive_field, stride, out_length);

  SignalBatch<Scalar> out{kernels * cols, out_length};
  out.data.colwise() += bias;

  if (cache) {
    cache->columns = std::move(cols);
    cache->input_length = input.length;
    cache->input_channels = input.channels();
    cache->receptive_field = receptive_field;
    cache->stride = stride;
  }
  return out;
}

template <typename Scalar>
ConvGradients<Scalar> conv1d_backward(const ConvCache<Scalar>& cache, const Matrix<Scalar>& kernels,
                                      const SignalBatch<Scalar>& grad_output, bool need_input_grad = true) {
  const Index out_length = conv_output_length(cache.input_length, cache.receptive_field, cache.stride);
  if (grad_output.length != out_length || grad_output.data.cols() != cache.columns.cols() ||
      grad_output.channels() != kernels.rows() ||
      kernels.cols() != cache.input_channels * cache.receptive_field)
    throw Error("conv1d_backward: gradient shape does not match forward trace");

  ConvGradients<Scalar> g;
  g.kernels = grad_output.data * cache.columns.transpose();
  g.bias = grad_output.data.rowwise().sum();
  if (need_input_grad) {
    const Matrix<Scalar> grad_cols = kernels.transpose() * grad_output.data;
    g.input = detail::col2im(grad_cols, cache, out_length);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization (no learnable scale or shift)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BatchNormStats {
  Vector<Scalar> mean;
  Vector<Scalar> variance;
  // False until at least one training-mode update has been folded in.
  bool tracked = false;

  static BatchNormStats initial(Index channels) {
    return {Vector<Scalar>::Zero(channels), Vector<Scalar>::Ones(channels), false};
  }
};

template <typename Scalar>
struct BatchNormCache {
  Matrix<Scalar> normalized;
  Vector<Scalar> inv_std;
};

/// Normalizes every channel by its statistics over (batch x positions) and
/// folds those statistics into the running averages.
template <typename Scalar>
SignalBatch<Scalar> batchnorm_train(const SignalBatch<Scalar>& input, BatchNormStats<Scalar>& stats,
                                    BatchNormCache<Scalar>* cache = nullptr) {
  if (input.data.cols() == 0) throw Error("batchnorm: empty batch");
  if (stats.mean.size() != input.channels()) throw Error("batchnorm: channel count mismatch");
  const Scalar n = static_cast<Scalar>(input.data.cols());
  const Vector<Scalar> mean = input.data.rowwise().mean();
  Matrix<Scalar> centered = input.data.colwise() - mean;
  const Vector<Scalar> variance = centered.array().square().rowwise().sum().matrix() / n;
  const Vector<Scalar> inv_std = (variance.array() + Scalar(kBatchNormEpsilon)).rsqrt().matrix();

  SignalBatch<Scalar> out{inv_std.asDiagonal() * centered, input.length};

  const Scalar m = Scalar(kBatchNormMomentum);
  stats.mean = m * stats.mean + (Scalar(1) - m) * mean;
  stats.variance = m * stats.variance + (Scalar(1) - m) * variance;
  stats.tracked = true;

  if (cache) {
    cache->normalized = out.data;
    cache->inv_std = inv_std;
  }
  return out;
}

template <typename Scalar>
SignalBatch<Scalar> batchnorm_infer(const SignalBatch<Scalar>& input, const BatchNormStats<Scalar>& stats) {
  if (!stats.tracked) throw Error("batchnorm: running statistics were never trained");
  if (stats.mean.size() != input.channels()) throw Error("batchnorm: channel count mismatch");
  const Vector<Scalar> inv_std = (stats.variance.array() + Scalar(kBatchNormEpsilon)).rsqrt().matrix();
  return {inv_std.asDiagonal() * (input.data.colwise() - stats.mean), input.length};
}

template <typename Scalar>
SignalBatch<Scalar> batchnorm_backward(const BatchNormCache<Scalar>& cache, const SignalBatch<Scalar>& grad_output) {
  if (grad_output.data.rows() != cache.normalized.rows() || grad_output.data.cols() != cache.normalized.cols())
    throw Error("batchnorm_backward: gradient shape does not match forward trace");
  const Scalar n = static_cast<Scalar>(grad_output.data.cols());
  const Vector<Scalar> sum_dy = grad_output.data.rowwise().sum();
  const Vector<Scalar> sum_dy_xhat = grad_output.data.cwiseProduct(cache.normalized).rowwise().sum();
  Matrix<Scalar> dx = (grad_output.data * n).colwise() - sum_dy;
  dx -= (sum_dy_xhat.asDiagonal() * cache.normalized);
  dx = (cache.inv_std / n).asDiagonal() * dx;
  return {std::move(dx), grad_output.length};
}

// ---------------------------------------------------------------------------
// Pointwise and dense layers
// ---------------------------------------------------------------------------

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar>& pre_activation, const Matrix<Scalar>& grad_output) {
  return (pre_activation.array() > Scalar(0)).select(grad_output, Scalar(0));
}

template <typename Scalar>
struct DenseGradients {
  Matrix<Scalar> input;
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
};

/// Affine map over a batch stored column-wise: (out x in) * (in x B) + bias.
template <typename Scalar>
Matrix<Scalar> dense_forward(const Matrix<Scalar>& input, const Matrix<Scalar>& weights, const Vector<Scalar>& bias) {
  if (weights.cols() != input.rows()) throw Error("dense: input width mismatch");
  if (bias.size() != weights.rows()) throw Error("dense: bias size mismatch");
  Matrix<Scalar> out = weights * input;
  out.colwise() += bias;
  return out;
}

template <typename Scalar>
DenseGradients<Scalar> dense_backward(const Matrix<Scalar>& input, const Matrix<Scalar>& weights,
                                      const Matrix<Scalar>& grad_output) {
  if (grad_output.rows() != weights.rows() || grad_output.cols() != input.cols())
    throw Error("dense_backward: gradient shape mismatch");
  return {weights.transpose() * grad_output, grad_output * input.transpose(), grad_output.rowwise().sum()};
}

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
template <typename Scalar, typename Rng>
Matrix<Scalar> dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  Matrix<Scalar> mask(rows, cols);
  if (p == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Scalar keep = Scalar(1.0 / (1.0 - p));
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) mask(i, j) = u(rng) < p ? Scalar(0) : keep;
  return mask;
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy
// ---------------------------------------------------------------------------

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
struct SoftmaxLoss {
  Scalar loss;
  Vector<Scalar> probabilities;
  Vector<Scalar> gradient;  // d loss / d logits = probs - one_hot
};

template <typename Derived>
SoftmaxLoss<typename Derived::Scalar> softmax_cross_entropy(const Eigen::MatrixBase<Derived>& logits, Index label) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= logits.size())
    throw Error("label " + std::to_string(label) + " outside [0, " + std::to_string(logits.size()) + ")");
  const Scalar top = logits.maxCoeff();
  const Scalar log_sum = top + std::log((logits.array() - top).exp().sum());
  SoftmaxLoss<Scalar> r;
  r.loss = log_sum - logits(label);
  r.probabilities = (logits.array() - log_sum).exp().matrix();
  r.gradient = r.probabilities;
  r.gradient(label) -= Scalar(1);
  return r;
}

}  // namespace pyrseiz

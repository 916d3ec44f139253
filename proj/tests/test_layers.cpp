#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pyrseiz/layers.hpp"

using namespace pyrseiz;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SignalBatch<double> row_signal(std::initializer_list<double> values) {
  VectorXd v(values.size());
  Index i = 0;
  for (double x : values) v(i++) = x;
  return {v.transpose(), static_cast<Index>(values.size())};
}

MatrixXd random_matrix(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

VectorXd flat(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

MatrixXd reshape(const VectorXd& v, Index r, Index c) { return Eigen::Map<const MatrixXd>(v.data(), r, c); }

}  // namespace

TEST_CASE("conv output lengths") {
  CHECK(conv_output_length(512, 5, 3) == 170);
  CHECK(conv_output_length(170, 3, 2) == 84);
  CHECK(conv_output_length(84, 3, 2) == 41);
  CHECK(conv_output_length(3, 3, 5) == 1);
  CHECK_THROWS_AS(conv_output_length(2, 3, 1), Error);
  CHECK_THROWS_AS(conv_output_length(10, 3, 0), Error);
}

TEST_CASE("conv difference kernel") {
  const auto in = row_signal({1, 2, 3, 4, 5});
  MatrixXd k(1, 3);
  k << 1, 0, -1;
  const auto out = conv1d_forward<double>(in, k, VectorXd::Zero(1), 3, 1);
  REQUIRE(out.length == 3);
  CHECK(out.data(0, 0) == doctest::Approx(-2));
  CHECK(out.data(0, 1) == doctest::Approx(-2));
  CHECK(out.data(0, 2) == doctest::Approx(-2));
}

TEST_CASE("conv unit kernel with stride picks every other sample") {
  const auto in = row_signal({7, 8, 9, 10});
  const auto out = conv1d_forward<double>(in, MatrixXd::Ones(1, 1), VectorXd::Zero(1), 1, 2);
  REQUIRE(out.length == 2);
  CHECK(out.data(0, 0) == 7);
  CHECK(out.data(0, 1) == 9);
}

TEST_CASE("conv matches the defining sum on a multi-channel batch") {
  Rng rng(3);
  const Index c = 3, len = 11, batch = 2, rf = 3, stride = 2, k = 4;
  SignalBatch<double> in{random_matrix(c, len * batch, rng), len};
  const MatrixXd w = random_matrix(k, c * rf, rng);
  const VectorXd b = random_matrix(k, 1, rng);
  const auto out = conv1d_forward(in, w, b, rf, stride);
  const Index out_len = (len - rf) / stride + 1;
  REQUIRE(out.length == out_len);
  for (Index s = 0; s < batch; ++s)
    for (Index l = 0; l < k; ++l)
      for (Index j = 0; j < out_len; ++j) {
        double ref = b(l);
        for (Index d = 0; d < c; ++d)
          for (Index e = 0; e < rf; ++e) ref += w(l, d * rf + e) * in.data(d, s * len + j * stride + e);
        CHECK(out.data(l, s * out_len + j) == doctest::Approx(ref).epsilon(1e-12));
      }
}

TEST_CASE("conv backward of zero upstream gradient is zero") {
  Rng rng(4);
  SignalBatch<double> in{random_matrix(2, 9, rng), 9};
  const MatrixXd w = random_matrix(3, 6, rng);
  ConvCache<double> cache;
  const auto out = conv1d_forward<double>(in, w, VectorXd::Zero(3), 3, 2, &cache);
  const auto g = conv1d_backward(cache, w, SignalBatch<double>{MatrixXd::Zero(3, out.data.cols()), out.length});
  CHECK(g.input.data.isZero());
  CHECK(g.kernels.isZero());
  CHECK(g.bias.isZero());
}

TEST_CASE("conv gradients match central differences") {
  Rng rng(11);
  const Index c = 2, len = 9, batch = 2, rf = 3, stride = 2, k = 3;
  const MatrixXd x0 = random_matrix(c, len * batch, rng);
  const MatrixXd w0 = random_matrix(k, c * rf, rng);
  const VectorXd b0 = random_matrix(k, 1, rng);
  const Index out_len = (len - rf) / stride + 1;
  const MatrixXd r = random_matrix(k, out_len * batch, rng);

  auto loss = [&](const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
    return conv1d_forward<double>({x, len}, w, b, rf, stride).data.cwiseProduct(r).sum();
  };
  ConvCache<double> cache;
  conv1d_forward<double>({x0, len}, w0, b0, rf, stride, &cache);
  const auto g = conv1d_backward(cache, w0, SignalBatch<double>{r, out_len});

  const double h = 1e-4;
  const auto nx = oracle::central_difference(
      [&](const VectorXd& v) { return loss(reshape(v, c, len * batch), w0, b0); }, flat(x0), h);
  const auto nw = oracle::central_difference([&](const VectorXd& v) { return loss(x0, reshape(v, k, c * rf), b0); },
                                             flat(w0), h);
  const auto nb = oracle::central_difference([&](const VectorXd& v) { return loss(x0, w0, v); }, b0, h);
  CHECK(oracle::max_relative_error(flat(g.input.data), nx) < 1e-6);
  CHECK(oracle::max_relative_error(flat(g.kernels), nw) < 1e-6);
  CHECK(oracle::max_relative_error(g.bias, nb) < 1e-6);
}

TEST_CASE("conv rejects mismatched kernels") {
  SignalBatch<double> in{MatrixXd::Ones(2, 8), 8};
  CHECK_THROWS_AS(conv1d_forward<double>(in, MatrixXd::Ones(1, 3), VectorXd::Zero(1), 3, 1), Error);
  CHECK_THROWS_AS(conv1d_forward<double>(in, MatrixXd::Ones(1, 6), VectorXd::Zero(2), 3, 1), Error);
}

TEST_CASE("batch norm of two values") {
  auto stats = BatchNormStats<double>::initial(1);
  SignalBatch<double> in{MatrixXd(1, 2), 1};
  in.data << 1, 3;
  const auto out = batchnorm_train(in, stats);
  const double expected = 1.0 / std::sqrt(1.0 + kBatchNormEpsilon);
  CHECK(out.data(0, 0) == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(out.data(0, 1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(stats.tracked);
  CHECK(stats.mean(0) == doctest::Approx(0.9 * 0 + 0.1 * 2));
  CHECK(stats.variance(0) == doctest::Approx(0.9 * 1 + 0.1 * 1));
}

TEST_CASE("batch norm of a constant channel is zero") {
  auto stats = BatchNormStats<double>::initial(2);
  SignalBatch<double> in{MatrixXd::Constant(2, 6, 4.5), 3};
  const auto out = batchnorm_train(in, stats);
  CHECK(out.data.isZero());
  CHECK(std::isfinite(stats.variance(0)));
}

TEST_CASE("batch norm output has zero mean and unit variance per channel") {
  Rng rng(5);
  auto stats = BatchNormStats<double>::initial(3);
  SignalBatch<double> in{random_matrix(3, 40, rng) * 7.0, 10};
  const auto out = batchnorm_train(in, stats);
  for (Index c = 0; c < 3; ++c) {
    const double mean = out.data.row(c).mean();
    const double var = (out.data.row(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("batch norm inference requires trained statistics") {
  const auto stats = BatchNormStats<double>::initial(1);
  SignalBatch<double> in{MatrixXd::Ones(1, 4), 4};
  CHECK_THROWS_AS(batchnorm_infer(in, stats), Error);
}

TEST_CASE("batch norm inference uses running statistics") {
  BatchNormStats<double> stats{VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 4.0), true};
  SignalBatch<double> in{MatrixXd(1, 2), 2};
  in.data << 2, 6;
  const auto out = batchnorm_infer(in, stats);
  CHECK(out.data(0, 0) == 0.0);
  CHECK(out.data(0, 1) == doctest::Approx(4.0 / std::sqrt(4.0 + kBatchNormEpsilon)));
}

TEST_CASE("batch norm backward matches central differences") {
  Rng rng(12);
  const Index c = 3, cols = 4 * 7;
  const MatrixXd x0 = random_matrix(c, cols, rng);
  const MatrixXd r = random_matrix(c, cols, rng);
  auto loss = [&](const VectorXd& v) {
    auto stats = BatchNormStats<double>::initial(c);
    return batchnorm_train<double>({reshape(v, c, cols), 7}, stats).data.cwiseProduct(r).sum();
  };
  auto stats = BatchNormStats<double>::initial(c);
  BatchNormCache<double> cache;
  batchnorm_train<double>({x0, 7}, stats, &cache);
  const auto g = batchnorm_backward(cache, SignalBatch<double>{r, 7});
  const auto n = oracle::central_difference(loss, flat(x0), 1e-5);
  CHECK(oracle::max_relative_error(flat(g.data), n) < 1e-6);
}

TEST_CASE("relu and its gradient") {
  MatrixXd x(1, 4);
  x << -1, 0, 2, -0.5;
  const MatrixXd y = relu(x);
  CHECK(y(0, 0) == 0);
  CHECK(y(0, 2) == 2);
  const MatrixXd g = relu_backward<double>(x, MatrixXd::Constant(1, 4, 3.0));
  CHECK(g(0, 0) == 0);
  CHECK(g(0, 1) == 0);
  CHECK(g(0, 2) == 3);
}

TEST_CASE("dense gradients match central differences") {
  Rng rng(13);
  const MatrixXd x0 = random_matrix(5, 3, rng);
  const MatrixXd w0 = random_matrix(4, 5, rng);
  const VectorXd b0 = random_matrix(4, 1, rng);
  const MatrixXd r = random_matrix(4, 3, rng);
  auto loss = [&](const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
    return dense_forward<double>(x, w, b).cwiseProduct(r).sum();
  };
  const auto g = dense_backward<double>(x0, w0, r);
  const double h = 1e-4;
  const auto nx = oracle::central_difference([&](const VectorXd& v) { return loss(reshape(v, 5, 3), w0, b0); },
                                             flat(x0), h);
  const auto nw = oracle::central_difference([&](const VectorXd& v) { return loss(x0, reshape(v, 4, 5), b0); },
                                             flat(w0), h);
  const auto nb = oracle::central_difference([&](const VectorXd& v) { return loss(x0, w0, v); }, b0, h);
  CHECK(oracle::max_relative_error(flat(g.input), nx) < 1e-6);
  CHECK(oracle::max_relative_error(flat(g.weights), nw) < 1e-6);
  CHECK(oracle::max_relative_error(g.bias, nb) < 1e-6);
}

TEST_CASE("dropout at rate zero is the identity") {
  Rng rng(1);
  CHECK(dropout_mask<double>(3, 4, 0.0, rng) == MatrixXd::Ones(3, 4));
  CHECK_THROWS_AS(dropout_mask<double>(1, 1, 1.0, rng), Error);
}

TEST_CASE("inverted dropout preserves the mean") {
  Rng rng(42);
  const auto m = dropout_mask<double>(1, 100000, 0.5, rng);
  for (Index i = 0; i < m.size(); ++i) REQUIRE((m(0, i) == 0.0 || m(0, i) == 2.0));
  CHECK(std::abs(m.mean() - 1.0) < 0.01);
}

TEST_CASE("softmax cross-entropy on equal logits") {
  const VectorXd z = VectorXd::Zero(2);
  const auto r = softmax_cross_entropy(z, 0);
  CHECK(r.probabilities(0) == doctest::Approx(0.5));
  CHECK(r.probabilities(1) == doctest::Approx(0.5));
  CHECK(r.loss == doctest::Approx(std::log(2.0)));
  CHECK(r.gradient(0) == doctest::Approx(-0.5));
  CHECK(r.gradient(1) == doctest::Approx(0.5));
}

TEST_CASE("softmax stays finite on extreme logits") {
  VectorXd z(3);
  z << 1e4, -1e4, 0;
  const auto r = softmax_cross_entropy(z, 1);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(2e4));
  CHECK(r.probabilities.allFinite());
  CHECK(r.probabilities.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(softmax_cross_entropy(z, 3), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(z, -1), Error);
}

TEST_CASE("softmax cross-entropy gradient matches central differences") {
  Rng rng(14);
  const VectorXd z0 = random_matrix(4, 1, rng);
  const auto g = softmax_cross_entropy(z0, 2).gradient;
  const auto n =
      oracle::central_difference([](const VectorXd& v) { return softmax_cross_entropy(v, 2).loss; }, z0, 1e-5);
  CHECK(oracle::max_relative_error(g, n) < 1e-6);
}

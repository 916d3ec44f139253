#pragma once

#include <cmath>

#include "pyrseiz/network.hpp"

namespace pyrseiz {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw Error("betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  }
};

/// One bias-corrected Adam update of a flat tensor; `step` is the 1-based
/// iteration count after incrementing.
template <typename P, typename G, typename M, typename V>
void adam_update(P&& param, const G& grad, M&& first, V&& second, long step, const AdamHyper& h) {
  using Scalar = typename std::decay_t<P>::Scalar;
  const Scalar b1 = Scalar(h.beta1), b2 = Scalar(h.beta2);
  first = b1 * first + (Scalar(1) - b1) * grad;
  second = b2 * second + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(step));
  param.array() -= Scalar(h.learning_rate) * (first.array() / c1) / ((second.array() / c2).sqrt() + Scalar(h.epsilon));
}

/// First and second moment accumulators mirroring the network's learnable tensors.
template <typename Scalar>
struct AdamState {
  NetworkParameters<Scalar> first;
  NetworkParameters<Scalar> second;
  long step = 0;

  static AdamState zeros(const ModelConfig& config) {
    return {NetworkParameters<Scalar>::zeros(config), NetworkParameters<Scalar>::zeros(config), 0};
  }
};

template <typename Scalar>
void adam_step(NetworkParameters<Scalar>& params, const NetworkParameters<Scalar>& grads, AdamState<Scalar>& state,
               const AdamHyper& hyper) {
  auto p = params.learnable();
  auto g = grads.learnable();
  auto m = state.first.learnable();
  auto v = state.second.learnable();
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw Error("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (g[i].size() != p[i].size() || m[i].size() != p[i].size() || v[i].size() != p[i].size())
      throw Error("adam_step: shape mismatch in " + NetworkParameters<Scalar>::learnable_names()[i]);
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) adam_update(p[i], g[i], m[i], v[i], state.step, hyper);
}

}  // namespace pyrseiz

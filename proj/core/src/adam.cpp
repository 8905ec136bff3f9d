// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/adam.hpp"

#include <cmath>

#include "mwgnn/error.hpp"

namespace mwgnn::ad {

void Adam::step(ParamStore& params) {
  if (!params.grads_ready()) throw StateError("adam step: no gradients; run backward first");
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (auto& [name, p] : params.items()) {
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh || mo.m.rows() != p.value.rows() || mo.m.cols() != p.value.cols()) {
      mo.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mo.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    const Matrix g = p.grad + cfg_.weight_decay * p.value;
    mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * g;
    mo.v = cfg_.beta2 * mo.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= cfg_.lr * (mo.m.array() / bc1) / ((mo.v.array() / bc2).sqrt() + cfg_.eps);
  }
  params.mark_grads_consumed();
}

}  // namespace mwgnn::ad

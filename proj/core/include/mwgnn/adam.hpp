// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "mwgnn/autodiff.hpp"

namespace mwgnn::ad {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Adam with L2 weight decay folded into the gradient (g += wd * w) before
/// the moment updates.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every parameter in the store. Throws StateError
  /// unless a backward pass has populated the grads since the last step.
  void step(ParamStore& params);

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mwgnn::ad

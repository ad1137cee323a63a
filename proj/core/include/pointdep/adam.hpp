#pragma once

#include <cstdint>

#include "pointdep/autodiff.hpp"

namespace pointdep::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created lazily on the first step
// with the shapes of the parameters they track.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  const ParamSet& first_moment() const { return m_; }
  const ParamSet& second_moment() const { return v_; }

 private:
  friend void adam_step(ParamSet& params, const GradientMap& grads,
                        AdamState& state);
  AdamConfig config_{};
  std::int64_t step_ = 0;
  ParamSet m_;
  ParamSet v_;
};

// Updates `params` in place and increments the step counter. Throws
// StructuralError if the gradient map does not cover exactly the parameters
// or shapes disagree; NumericalError (naming the parameter) on non-finite
// gradients. On error nothing is modified.
void adam_step(ParamSet& params, const GradientMap& grads, AdamState& state);

}  // namespace pointdep::ad

#include "pointdep/adam.hpp"

#include <cmath>

#include "pointdep/error.hpp"

namespace pointdep::ad {

AdamState::AdamState(AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0))
    throw StructuralError("adam: learning rate must be positive");
}

void adam_step(ParamSet& params, const GradientMap& grads, AdamState& state) {
  if (grads.size() != params.size())
    throw StructuralError("adam: gradient map does not match parameter set");
  for (const auto& [name, p] : params) {
    auto g = grads.find(name);
    if (g == grads.end())
      throw StructuralError("adam: missing gradient for '" + name + "'");
    if (g->second.rows() != p.rows() || g->second.cols() != p.cols())
      throw StructuralError("adam: gradient shape mismatch for '" + name + "'");
    if (!g->second.allFinite())
      throw NumericalError("adam: non-finite gradient for '" + name + "'");
    auto m = state.m_.find(name);
    if (m != state.m_.end() &&
        (m->second.rows() != p.rows() || m->second.cols() != p.cols()))
      throw StructuralError("adam: moment shape mismatch for '" + name + "'");
  }

  const AdamConfig& c = state.config_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  for (auto& [name, p] : params) {
    const Matrix& g = grads.at(name);
    auto [mi, m_new] = state.m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    auto [vi, v_new] = state.v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    Matrix& m = mi->second;
    Matrix& v = vi->second;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    p.array() -= c.learning_rate * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

}  // namespace pointdep::ad

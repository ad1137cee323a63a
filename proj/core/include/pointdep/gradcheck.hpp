#pragma once

// Finite-difference verification of every learning objective through both
// critic designs. Used by the CLI and by the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "pointdep/critics.hpp"
#include "pointdep/objectives.hpp"

namespace pointdep {

struct GradcheckConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int batch = 6;
  int hidden = 3;
  double step = 1e-4;
  // Inputs are resampled until every ReLU pre-activation is at least this far
  // from zero, so a central difference never straddles a kink.
  double kink_margin = 1e-3;
  // Negative control: scales every analytic gradient by (1 + corrupt).
  double corrupt = 0.0;
};

struct GradcheckRow {
  ObjectiveKind objective;
  CriticDesign design;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
};

const std::vector<ObjectiveKind>& gradcheck_objectives();

GradcheckRow gradcheck_one(ObjectiveKind objective, CriticDesign design,
                           std::uint64_t seed, const GradcheckConfig& config);

// objectives x {concatenate, separate} x seeds, in that nesting order.
std::vector<GradcheckRow> run_gradcheck(const GradcheckConfig& config);

}  // namespace pointdep

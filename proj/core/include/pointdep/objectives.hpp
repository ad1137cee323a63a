#pragma once

// Learning objectives. Each function returns the negation of the objective
// as stated in maximisation form, so training always minimises.

#include <string_view>
#include <vector>

#include "pointdep/autodiff.hpp"

namespace pointdep {

using ad::Matrix;

enum class ObjectiveKind { JS, DM1, DM2, PC, DRF, NWJ, DV, CPC, SmileLearning };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);
// SmileLearning trains exactly like JS.
ObjectiveKind canonical(ObjectiveKind kind);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::JS;
  double lambda = 1.0;        // DM1 dual variable, held fixed
  double eta = 1.0;           // DM2 penalty coefficient
  double sample_ratio = 1.0;  // n_product / n_joint, used by the PC estimator

  void validate() const;
};

// Scores drawn from one distribution. With empty `weights` expectations are
// batch means; otherwise `weights` (same shape as the scores, summing to one)
// turns every expectation into an exact weighted sum.
struct ScoreSet {
  ad::Var scores;
  Matrix weights;
};

ad::Var loss_js(const ScoreSet& joint, const ScoreSet& product);
ad::Var loss_dm1(const ScoreSet& joint, const ScoreSet& product,
                 double lambda = 1.0);
ad::Var loss_dm2(const ScoreSet& joint, const ScoreSet& product,
                 double eta = 1.0);
// Scores are classifier logits; sigmoid is applied here.
ad::Var loss_pc(const ScoreSet& joint, const ScoreSet& product);
// Scores are ratio estimates used as-is.
ad::Var loss_drf(const ScoreSet& joint, const ScoreSet& product);
ad::Var loss_nwj(const ScoreSet& joint, const ScoreSet& product);
ad::Var loss_dv(const ScoreSet& joint, const ScoreSet& product);
// Square n x n matrix; the diagonal holds the aligned pairs.
ad::Var loss_cpc(ad::Var score_matrix);

// Dispatch for every pair-based objective; CPC is rejected here.
ad::Var pair_loss(const ObjectiveSpec& spec, const ScoreSet& joint,
                  const ScoreSet& product);

double loss_value(const ObjectiveSpec& spec, const std::vector<double>& joint,
                  const std::vector<double>& product);
// Exact-expectation form: weights are probabilities of each score.
double loss_value(const ObjectiveSpec& spec, const std::vector<double>& joint,
                  const std::vector<double>& joint_weights,
                  const std::vector<double>& product,
                  const std::vector<double>& product_weights);
double cpc_loss_value(const Matrix& scores);

}  // namespace pointdep

#pragma once

// Inference rules that turn trained critic scores into MI estimates, and the
// named estimator table pairing each learning objective with a rule.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointdep/objectives.hpp"

namespace pointdep {

enum class InferenceRule {
  PluginPmi,         // mean of f over joint samples
  PluginPd,          // mean of log max(r, floor)
  PluginClassifier,  // r = ratio * p / (1 - p), p = sigmoid(logit)
  NwjBound,
  DvBound,
  DvClipped,
  CpcBound,
};

std::string_view to_string(InferenceRule rule);

inline constexpr double kPdFloor = 1e-7;
inline constexpr double kProbabilityClamp = 1e-7;
inline constexpr double kDefaultClip = 10.0;

struct EstimatorSpec {
  std::string name;
  ObjectiveKind learning = ObjectiveKind::JS;
  InferenceRule inference = InferenceRule::PluginPmi;
  double clip = kDefaultClip;  // DvClipped only
  // Score offset applied before inference. JS critics approach log r while
  // the NWJ bound is tight at 1 + log r.
  double inference_shift = 0.0;

  bool uses_score_matrix() const { return learning == ObjectiveKind::CPC; }
  ObjectiveSpec objective() const { return ObjectiveSpec{learning}; }
};

// cpc, nwj, js, dv, smile, vmib, pc, dm1, dm2, drf
const std::vector<EstimatorSpec>& estimator_table();
std::vector<std::string> estimator_names();
// StructuralError listing the valid names if `name` is unknown.
const EstimatorSpec& find_estimator(std::string_view name);

// p is clamped to [1e-7, 1 - 1e-7]; p outside [0, 1] is a StructuralError.
double pd_from_classifier(double p, double sample_ratio);

// Optional `weights` switch batch means to exact weighted expectations.
double mi_plugin_pmi(std::span<const double> pmi,
                     std::span<const double> weights = {});
double mi_plugin_pd(std::span<const double> pd,
                    std::span<const double> weights = {});

double mi_nwj_bound(std::span<const double> joint,
                    std::span<const double> product,
                    std::span<const double> joint_weights = {},
                    std::span<const double> product_weights = {});
// With `clip`, product scores are clamped into [-clip, clip] first.
double mi_dv_bound(std::span<const double> joint,
                   std::span<const double> product,
                   std::optional<double> clip = std::nullopt,
                   std::span<const double> joint_weights = {},
                   std::span<const double> product_weights = {});
double mi_cpc_bound(const Matrix& score_matrix);

// Point estimate of PMI for one score under the estimator's rule. Only the
// plug-in rules define one; the bound rules throw StructuralError.
double pointwise_pmi(const EstimatorSpec& spec, double score,
                     double sample_ratio = 1.0);

struct InferenceInput {
  std::span<const double> joint;
  std::span<const double> product;
  const Matrix* score_matrix = nullptr;  // CPC only
  double sample_ratio = 1.0;
};

double infer(const EstimatorSpec& spec, const InferenceInput& input);

}  // namespace pointdep

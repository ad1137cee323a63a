#include "pointdep/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pointdep/error.hpp"

namespace pointdep {

namespace {

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw UsageError(std::string(what) + ": empty batch");
}

void check_weights(std::span<const double> v, std::span<const double> w) {
  if (!w.empty() && w.size() != v.size())
    throw StructuralError("estimator: weights and values differ in length");
}

template <class F>
double expectation(std::span<const double> v, std::span<const double> w, F f) {
  check_weights(v, w);
  double s = 0.0;
  if (w.empty()) {
    for (double x : v) s += f(x);
    return s / static_cast<double>(v.size());
  }
  for (std::size_t i = 0; i < v.size(); ++i)
    if (w[i] != 0.0) s += w[i] * f(v[i]);
  return s;
}

// log E[exp f], max-shifted; zero-weight entries are skipped.
double log_expect_exp(std::span<const double> v, std::span<const double> w) {
  check_weights(v, w);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (w.empty() || w[i] != 0.0) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double wi = w.empty() ? 1.0 / static_cast<double>(v.size()) : w[i];
    if (wi != 0.0) s += wi * std::exp(v[i] - m);
  }
  return m + std::log(s);
}

std::vector<double> shifted(std::span<const double> v, double shift) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x += shift;
  return out;
}

}  // namespace

std::string_view to_string(InferenceRule rule) {
  switch (rule) {
    case InferenceRule::PluginPmi: return "plugin-pmi";
    case InferenceRule::PluginPd: return "plugin-pd";
    case InferenceRule::PluginClassifier: return "plugin-classifier";
    case InferenceRule::NwjBound: return "nwj-bound";
    case InferenceRule::DvBound: return "dv-bound";
    case InferenceRule::DvClipped: return "dv-clipped";
    case InferenceRule::CpcBound: return "cpc-bound";
  }
  return "unknown";
}

const std::vector<EstimatorSpec>& estimator_table() {
  using K = ObjectiveKind;
  using R = InferenceRule;
  static const std::vector<EstimatorSpec> table = {
      {"cpc", K::CPC, R::CpcBound},
      {"nwj", K::NWJ, R::NwjBound},
      {"js", K::JS, R::NwjBound, kDefaultClip, 1.0},
      {"dv", K::DV, R::DvBound},
      {"smile", K::SmileLearning, R::DvClipped},
      {"vmib", K::JS, R::PluginPmi},
      {"pc", K::PC, R::PluginClassifier},
      {"dm1", K::DM1, R::PluginPmi},
      {"dm2", K::DM2, R::PluginPmi},
      {"drf", K::DRF, R::PluginPd},
  };
  return table;
}

std::vector<std::string> estimator_names() {
  std::vector<std::string> out;
  for (const auto& e : estimator_table()) out.push_back(e.name);
  return out;
}

const EstimatorSpec& find_estimator(std::string_view name) {
  for (const auto& e : estimator_table())
    if (e.name == name) return e;
  std::ostringstream os;
  os << "unknown estimator '" << name << "'; valid:";
  for (const auto& e : estimator_table()) os << " " << e.name;
  throw StructuralError(os.str());
}

double pd_from_classifier(double p, double sample_ratio) {
  if (!(p >= 0.0 && p <= 1.0))
    throw StructuralError("pd_from_classifier: probability outside [0, 1]");
  if (!(sample_ratio > 0.0))
    throw StructuralError("pd_from_classifier: sample ratio must be positive");
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return sample_ratio * p / (1.0 - p);
}

double mi_plugin_pmi(std::span<const double> pmi, std::span<const double> weights) {
  require_nonempty(pmi, "mi_plugin");
  return expectation(pmi, weights, [](double f) { return f; });
}

double mi_plugin_pd(std::span<const double> pd, std::span<const double> weights) {
  require_nonempty(pd, "mi_plugin");
  return expectation(pd, weights,
                     [](double r) { return std::log(std::max(r, kPdFloor)); });
}

double mi_nwj_bound(std::span<const double> joint, std::span<const double> product,
                    std::span<const double> joint_weights,
                    std::span<const double> product_weights) {
  require_nonempty(joint, "mi_nwj_bound");
  require_nonempty(product, "mi_nwj_bound");
  const double ep = expectation(joint, joint_weights, [](double f) { return f; });
  return ep - std::exp(log_expect_exp(product, product_weights) - 1.0);
}

double mi_dv_bound(std::span<const double> joint, std::span<const double> product,
                   std::optional<double> clip, std::span<const double> joint_weights,
                   std::span<const double> product_weights) {
  require_nonempty(joint, "mi_dv_bound");
  require_nonempty(product, "mi_dv_bound");
  const double ep = expectation(joint, joint_weights, [](double f) { return f; });
  if (!clip) return ep - log_expect_exp(product, product_weights);
  if (!(*clip > 0.0)) throw StructuralError("mi_dv_bound: clip must be positive");
  std::vector<double> clamped(product.begin(), product.end());
  for (double& f : clamped) f = std::clamp(f, -*clip, *clip);
  return ep - log_expect_exp(clamped, product_weights);
}

double mi_cpc_bound(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0)
    throw StructuralError("mi_cpc_bound: score matrix must be square and nonempty");
  const double n = static_cast<double>(s.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::RowVectorXd row = s.row(i);
    total += s(i, i) - (ad::logsumexp(row.data(), row.size()) - std::log(n));
  }
  return total / n;
}

double pointwise_pmi(const EstimatorSpec& spec, double score, double sample_ratio) {
  switch (spec.inference) {
    case InferenceRule::PluginPmi:
      return score + spec.inference_shift;
    case InferenceRule::PluginPd:
      return std::log(std::max(score, kPdFloor));
    case InferenceRule::PluginClassifier:
      return std::log(pd_from_classifier(ad::sigmoid(score), sample_ratio));
    default:
      break;
  }
  throw StructuralError("estimator '" + spec.name + "' has no point-wise PMI estimate");
}

double infer(const EstimatorSpec& spec, const InferenceInput& in) {
  switch (spec.inference) {
    case InferenceRule::PluginPmi:
    case InferenceRule::PluginPd:
    case InferenceRule::PluginClassifier: {
      require_nonempty(in.joint, "mi_plugin");
      std::vector<double> pmi;
      pmi.reserve(in.joint.size());
      for (double s : in.joint) pmi.push_back(pointwise_pmi(spec, s, in.sample_ratio));
      return mi_plugin_pmi(pmi);
    }
    case InferenceRule::NwjBound: {
      auto p = shifted(in.joint, spec.inference_shift);
      auto q = shifted(in.product, spec.inference_shift);
      return mi_nwj_bound(p, q);
    }
    case InferenceRule::DvBound:
      return mi_dv_bound(in.joint, in.product);
    case InferenceRule::DvClipped:
      return mi_dv_bound(in.joint, in.product, spec.clip);
    case InferenceRule::CpcBound:
      if (in.score_matrix == nullptr)
        throw UsageError("infer: CPC estimator needs a score matrix");
      return mi_cpc_bound(*in.score_matrix);
  }
  throw StructuralError("infer: unknown inference rule");
}

}  // namespace pointdep

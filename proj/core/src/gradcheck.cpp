#include "pointdep/gradcheck.hpp"

#include <random>

#include "pointdep/datagen.hpp"
#include "pointdep/error.hpp"
#include "pointdep/rng.hpp"

namespace pointdep {

const std::vector<ObjectiveKind>& gradcheck_objectives() {
  static const std::vector<ObjectiveKind> all = {
      ObjectiveKind::JS,  ObjectiveKind::DM1, ObjectiveKind::DM2,
      ObjectiveKind::PC,  ObjectiveKind::DRF, ObjectiveKind::NWJ,
      ObjectiveKind::DV,  ObjectiveKind::CPC, ObjectiveKind::SmileLearning};
  return all;
}

namespace {

Matrix normal_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = n(rng);
  return m;
}

ad::Var build_loss(ad::Graph& g, const CriticParams& critic, ObjectiveKind kind,
                   const Matrix& x, const Matrix& y, const std::vector<int>& perm) {
  BoundCritic c = bind_critic(g, critic);
  if (kind == ObjectiveKind::CPC) return loss_cpc(score_matrix(g, c, x, y));
  auto s = joint_and_product_scores(g, c, x, y, perm);
  return pair_loss(ObjectiveSpec{kind}, {s.joint, {}}, {s.product, {}});
}

}  // namespace

GradcheckRow gradcheck_one(ObjectiveKind objective, CriticDesign design,
                           std::uint64_t seed, const GradcheckConfig& cfg) {
  const int dim = 2;
  CriticDescriptor d{design, dim, dim, cfg.hidden, 2};
  const std::string tag = std::string(to_string(objective)) + "/" + std::string(to_string(design));
  CriticParams critic = init_params(d, derive_seed(seed, "gradcheck-critic:" + tag));
  Matrix x, y;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100)
      throw NumericalError("gradcheck: could not draw inputs away from ReLU kinks");
    Rng rng = make_rng(seed, "gradcheck-data:" + tag, static_cast<std::uint64_t>(attempt));
    x = normal_matrix(cfg.batch, dim, rng);
    y = normal_matrix(cfg.batch, dim, rng);
    if (min_abs_preactivation(critic, x, y) >= cfg.kink_margin) break;
  }
  // A cyclic shift keeps the product batch free of self-pairs.
  std::vector<int> perm(static_cast<std::size_t>(cfg.batch));
  for (int i = 0; i < cfg.batch; ++i) perm[i] = (i + 1) % cfg.batch;

  ad::Graph g;
  ad::Var root = build_loss(g, critic, objective, x, y, perm);
  g.evaluate(root);
  ad::GradientMap analytic = g.backward(root);
  if (cfg.corrupt != 0.0)
    for (auto& [_, grad] : analytic) grad *= 1.0 + cfg.corrupt;

  auto loss = [&](const ad::ParamSet& w) {
    CriticParams probe = critic;
    probe.weights = w;
    ad::Graph h;
    return h.evaluate(build_loss(h, probe, objective, x, y, perm));
  };
  ad::GradientMap numeric = ad::finite_difference_grad(loss, critic.weights, cfg.step);
  return {objective, design, seed, ad::max_relative_error(analytic, numeric)};
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckConfig& config) {
  if (config.batch < 2 || config.hidden < 1 || !(config.step > 0.0))
    throw StructuralError("gradcheck: invalid batch, hidden width or step");
  std::vector<GradcheckRow> rows;
  for (auto objective : gradcheck_objectives())
    for (auto design : {CriticDesign::Concatenate, CriticDesign::Separate})
      for (auto seed : config.seeds) rows.push_back(gradcheck_one(objective, design, seed, config));
  return rows;
}

}  // namespace pointdep

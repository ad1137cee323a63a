#include "pointdep/objectives.hpp"

#include <cmath>
#include <string>

#include "pointdep/error.hpp"

namespace pointdep {

namespace {

ad::Var expect(const ScoreSet& s) {
  if (s.weights.size() == 0) return ad::mean(s.scores);
  return ad::weighted_sum(s.scores, s.weights);
}

// log E[exp f], max-shifted.
ad::Var log_expect_exp(const ScoreSet& s) {
  if (s.weights.size() == 0) return ad::logmeanexp(s.scores);
  return ad::logsumexp(ad::add_const(s.scores, s.weights.array().log().matrix()));
}

// E[exp f] through the log domain.
ad::Var expect_exp(const ScoreSet& s) { return ad::exp(log_expect_exp(s)); }

Matrix column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

Matrix weight_column(const std::vector<double>& w, std::size_t n) {
  if (w.size() != n)
    throw StructuralError("loss_value: weights and scores differ in length");
  return column(w);
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::JS: return "js";
    case ObjectiveKind::DM1: return "dm1";
    case ObjectiveKind::DM2: return "dm2";
    case ObjectiveKind::PC: return "pc";
    case ObjectiveKind::DRF: return "drf";
    case ObjectiveKind::NWJ: return "nwj";
    case ObjectiveKind::DV: return "dv";
    case ObjectiveKind::CPC: return "cpc";
    case ObjectiveKind::SmileLearning: return "smile";
  }
  return "unknown";
}

ObjectiveKind parse_objective(std::string_view name) {
  for (auto k : {ObjectiveKind::JS, ObjectiveKind::DM1, ObjectiveKind::DM2,
                 ObjectiveKind::PC, ObjectiveKind::DRF, ObjectiveKind::NWJ,
                 ObjectiveKind::DV, ObjectiveKind::CPC,
                 ObjectiveKind::SmileLearning}) {
    if (to_string(k) == name) return k;
  }
  throw StructuralError("unknown objective '" + std::string(name) + "'");
}

ObjectiveKind canonical(ObjectiveKind kind) {
  return kind == ObjectiveKind::SmileLearning ? ObjectiveKind::JS : kind;
}

void ObjectiveSpec::validate() const {
  if (!(eta > 0.0)) throw StructuralError("objective: eta must be positive");
  if (!(sample_ratio > 0.0))
    throw StructuralError("objective: sample ratio must be positive");
  if (!std::isfinite(lambda))
    throw StructuralError("objective: lambda must be finite");
}

// -( E_P[-softplus(-f)] - E_Q[softplus(f)] )
ad::Var loss_js(const ScoreSet& joint, const ScoreSet& product) {
  ad::Var p = expect({ad::softplus(ad::neg(joint.scores)), joint.weights});
  ad::Var q = expect({ad::softplus(product.scores), product.weights});
  return ad::add(p, q);
}

// -( E_P[f] - lambda (E_Q[e^f] - 1) )
ad::Var loss_dm1(const ScoreSet& joint, const ScoreSet& product, double lambda) {
  ad::Var constraint = ad::add_scalar(expect_exp(product), -1.0);
  return ad::sub(ad::scale(constraint, lambda), expect(joint));
}

// -( E_P[f] - eta (log E_Q[e^f])^2 )
ad::Var loss_dm2(const ScoreSet& joint, const ScoreSet& product, double eta) {
  if (!(eta > 0.0)) throw StructuralError("loss_dm2: eta must be positive");
  ad::Var penalty = ad::square(log_expect_exp(product));
  return ad::sub(ad::scale(penalty, eta), expect(joint));
}

// -( E_P[log sigma(l)] + E_Q[log(1 - sigma(l))] ), log(1 - sigma(l)) = log sigma(-l)
ad::Var loss_pc(const ScoreSet& joint, const ScoreSet& product) {
  ad::Var p = expect({ad::log_sigmoid(joint.scores), joint.weights});
  ad::Var q = expect({ad::log_sigmoid(ad::neg(product.scores)), product.weights});
  return ad::neg(ad::add(p, q));
}

// -( E_P[r] - 1/2 E_Q[r^2] )
ad::Var loss_drf(const ScoreSet& joint, const ScoreSet& product) {
  ad::Var q = expect({ad::square(product.scores), product.weights});
  return ad::sub(ad::scale(q, 0.5), expect(joint));
}

// -( E_P[f] - e^{-1} E_Q[e^f] ) = -( E_P[f] - E_Q[e^{f-1}] )
ad::Var loss_nwj(const ScoreSet& joint, const ScoreSet& product) {
  ad::Var q = ad::exp(ad::add_scalar(log_expect_exp(product), -1.0));
  return ad::sub(q, expect(joint));
}

// -( E_P[f] - log E_Q[e^f] )
ad::Var loss_dv(const ScoreSet& joint, const ScoreSet& product) {
  return ad::sub(log_expect_exp(product), expect(joint));
}

// -(1/n) sum_i [ s_ii - log (1/n) sum_j e^{s_ij} ]
ad::Var loss_cpc(ad::Var score_matrix) {
  ad::Var per_row = ad::sub(ad::diag(score_matrix), ad::logmeanexp_rows(score_matrix));
  return ad::neg(ad::mean(per_row));
}

ad::Var pair_loss(const ObjectiveSpec& spec, const ScoreSet& joint,
                  const ScoreSet& product) {
  spec.validate();
  switch (canonical(spec.kind)) {
    case ObjectiveKind::JS: return loss_js(joint, product);
    case ObjectiveKind::DM1: return loss_dm1(joint, product, spec.lambda);
    case ObjectiveKind::DM2: return loss_dm2(joint, product, spec.eta);
    case ObjectiveKind::PC: return loss_pc(joint, product);
    case ObjectiveKind::DRF: return loss_drf(joint, product);
    case ObjectiveKind::NWJ: return loss_nwj(joint, product);
    case ObjectiveKind::DV: return loss_dv(joint, product);
    case ObjectiveKind::CPC:
    case ObjectiveKind::SmileLearning:
      break;
  }
  throw StructuralError("pair_loss: CPC is defined on a score matrix");
}

double loss_value(const ObjectiveSpec& spec, const std::vector<double>& joint,
                  const std::vector<double>& product) {
  ad::Graph g;
  ScoreSet p{g.constant(column(joint)), {}};
  ScoreSet q{g.constant(column(product)), {}};
  return g.evaluate(pair_loss(spec, p, q));
}

double loss_value(const ObjectiveSpec& spec, const std::vector<double>& joint,
                  const std::vector<double>& joint_weights,
                  const std::vector<double>& product,
                  const std::vector<double>& product_weights) {
  ad::Graph g;
  ScoreSet p{g.constant(column(joint)), weight_column(joint_weights, joint.size())};
  ScoreSet q{g.constant(column(product)),
             weight_column(product_weights, product.size())};
  return g.evaluate(pair_loss(spec, p, q));
}

double cpc_loss_value(const Matrix& scores) {
  ad::Graph g;
  return g.evaluate(loss_cpc(g.constant(scores)));
}

}  // namespace pointdep

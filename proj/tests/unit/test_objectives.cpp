#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pointdep/datagen.hpp"
#include "pointdep/error.hpp"
#include "pointdep/objectives.hpp"
#include "pointdep/rng.hpp"

using namespace pointdep;

namespace {

const double kLn2 = std::log(2.0);

std::vector<double> constant(std::size_t n, double v) { return std::vector<double>(n, v); }

double loss(ObjectiveKind kind, const std::vector<double>& p, const std::vector<double>& q) {
  return loss_value(ObjectiveSpec{kind}, p, q);
}

// Exact-expectation loss on a discrete joint for a score table f.
double exact_loss(const ObjectiveSpec& spec, const DiscreteJoint& joint, const Matrix& f) {
  auto flat = flatten_for_expectation(joint, f);
  return loss_value(spec, flat.joint_values, flat.joint_weights, flat.product_values,
                    flat.product_weights);
}

Matrix log_ratio(const DiscreteJoint& joint) {
  return oracle_pd_table(joint).array().log().matrix();
}

const DiscreteJoint& two_by_two() {
  static const DiscreteJoint j((Matrix(2, 2) << 0.4, 0.1, 0.1, 0.4).finished());
  return j;
}

}  // namespace

TEST(JS, ZeroScores) { EXPECT_NEAR(loss(ObjectiveKind::JS, constant(5, 0), constant(7, 0)), 2 * kLn2, 1e-15); }

TEST(JS, SeparatedScores) {
  EXPECT_NEAR(loss(ObjectiveKind::JS, constant(4, 10), constant(4, -10)),
              2 * std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(loss(ObjectiveKind::JS, constant(4, 10), constant(4, -10)), 9.08e-5, 1e-7);
}

TEST(JS, TrueLogRatioIsStationary) {
  auto joint = DiscreteJoint::random(3, 4, 5);
  const ObjectiveSpec spec{ObjectiveKind::JS};
  const Matrix f = log_ratio(joint);
  const double at_opt = exact_loss(spec, joint, f);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      for (double h : {1e-3, -1e-3}) {
        Matrix g = f;
        g(i, j) += h;
        EXPECT_GE(exact_loss(spec, joint, g), at_opt - 1e-15);
      }
}

TEST(SmileLearning, IsJS) {
  EXPECT_EQ(canonical(ObjectiveKind::SmileLearning), ObjectiveKind::JS);
  std::vector<double> p{0.3, -1.2, 2.0}, q{0.1, 0.5, -0.7, 1.1};
  EXPECT_DOUBLE_EQ(loss(ObjectiveKind::SmileLearning, p, q), loss(ObjectiveKind::JS, p, q));
}

TEST(DM1, ClosedForms) {
  EXPECT_NEAR(loss(ObjectiveKind::DM1, constant(3, 0), constant(3, 0)), 0.0, 1e-15);
  EXPECT_NEAR(loss(ObjectiveKind::DM1, constant(3, 1), constant(3, 1)), std::exp(1.0) - 2.0, 1e-15);
}

TEST(DM1, OracleOptimumIsMI) {
  auto joint = DiscreteJoint::random(4, 4, 2);
  EXPECT_NEAR(exact_loss(ObjectiveSpec{ObjectiveKind::DM1}, joint, log_ratio(joint)),
              -oracle_mi(joint), 1e-9);
}

TEST(DM2, ClosedForms) {
  EXPECT_NEAR(loss(ObjectiveKind::DM2, constant(3, 0), constant(3, 0)), 0.0, 1e-15);
  for (double eta : {0.5, 1.0, 2.0}) {
    ObjectiveSpec spec{ObjectiveKind::DM2, 1.0, eta};
    auto at = [&](double c) { return loss_value(spec, constant(3, c), constant(5, c)); };
    const double c = 0.8;
    EXPECT_NEAR(at(c), -(c - eta * c * c), 1e-12);
    const double best = 1.0 / (2.0 * eta);
    EXPECT_LT(at(best), at(best + 0.01));
    EXPECT_LT(at(best), at(best - 0.01));
  }
}

TEST(DM2, OracleOptimumIsMI) {
  auto joint = DiscreteJoint::random(4, 4, 3);
  EXPECT_NEAR(exact_loss(ObjectiveSpec{ObjectiveKind::DM2}, joint, log_ratio(joint)),
              -oracle_mi(joint), 1e-9);
}

TEST(PC, ClosedForms) {
  EXPECT_NEAR(loss(ObjectiveKind::PC, constant(2, 0), constant(2, 0)), 2 * kLn2, 1e-15);
  EXPECT_LT(loss(ObjectiveKind::PC, constant(2, 20), constant(2, -20)), 1e-8);
}

TEST(PC, EqualsJSOnRandomLogits) {
  auto rng = make_rng(0, "pc-js");
  std::normal_distribution<double> n(0.0, 5.0);
  std::uniform_int_distribution<int> len(1, 64);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(len(rng)), q(len(rng));
    for (auto& v : p) v = n(rng);
    for (auto& v : q) v = n(rng);
    EXPECT_NEAR(loss(ObjectiveKind::PC, p, q), loss(ObjectiveKind::JS, p, q), 1e-12);
  }
}

TEST(DRF, ClosedForms) {
  EXPECT_DOUBLE_EQ(loss(ObjectiveKind::DRF, constant(3, 1), constant(3, 1)), -0.5);
  EXPECT_DOUBLE_EQ(loss(ObjectiveKind::DRF, constant(3, 0), constant(3, 0)), 0.0);
}

TEST(DRF, OracleOptimumIsHalfSecondMoment) {
  auto joint = DiscreteJoint::random(3, 5, 4);
  const Matrix r = oracle_pd_table(joint);
  const double half_sq = 0.5 * oracle_expectations(joint, r).product_mean_sq;
  EXPECT_NEAR(-exact_loss(ObjectiveSpec{ObjectiveKind::DRF}, joint, r), half_sq, 1e-9);
}

TEST(NWJ, ClosedForms) {
  EXPECT_NEAR(loss(ObjectiveKind::NWJ, constant(3, 1), constant(3, 1)), 0.0, 1e-15);
  EXPECT_NEAR(loss(ObjectiveKind::NWJ, constant(3, 0), constant(3, 0)), std::exp(-1.0), 1e-15);
}

TEST(NWJ, OracleOptimumIsMI) {
  auto joint = DiscreteJoint::random(4, 4, 6);
  Matrix f = log_ratio(joint).array() + 1.0;
  EXPECT_NEAR(-exact_loss(ObjectiveSpec{ObjectiveKind::NWJ}, joint, f), oracle_mi(joint), 1e-9);
}

TEST(DV, ConstantScoresGiveZero) {
  for (double c : {-30.0, 0.0, 2.5, 90.0})
    EXPECT_NEAR(loss(ObjectiveKind::DV, constant(4, c), constant(6, c)), 0.0, 1e-12);
}

TEST(DV, OracleOptimumIsMI) {
  auto joint = DiscreteJoint::random(4, 4, 7);
  EXPECT_NEAR(-exact_loss(ObjectiveSpec{ObjectiveKind::DV}, joint, log_ratio(joint)),
              oracle_mi(joint), 1e-9);
}

TEST(DV, ShiftInvariance) {
  auto rng = make_rng(1, "dv-shift");
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> p(17), q(23);
    for (auto& v : p) v = n(rng);
    for (auto& v : q) v = n(rng);
    const double c = n(rng) * 10;
    auto ps = p, qs = q;
    for (auto& v : ps) v += c;
    for (auto& v : qs) v += c;
    EXPECT_NEAR(loss(ObjectiveKind::DV, p, q), loss(ObjectiveKind::DV, ps, qs), 1e-9);
  }
}

TEST(LowerBounds, NWJAndDVNeverExceedMI) {
  auto rng = make_rng(2, "bounds");
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 5; ++t) {
    auto joint = DiscreteJoint::random(4, 4, 100 + t);
    const double mi = oracle_mi(joint);
    for (int k = 0; k < 100; ++k) {
      Matrix f(4, 4);
      for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng);
      EXPECT_LE(-exact_loss(ObjectiveSpec{ObjectiveKind::NWJ}, joint, f), mi + 1e-9);
      EXPECT_LE(-exact_loss(ObjectiveSpec{ObjectiveKind::DV}, joint, f), mi + 1e-9);
    }
  }
}

TEST(CPC, ClosedForms) {
  EXPECT_NEAR(cpc_loss_value(Matrix::Constant(5, 5, 3.0)), 0.0, 1e-15);
  EXPECT_NEAR(cpc_loss_value(Matrix::Constant(1, 1, -7.0)), 0.0, 1e-15);
  // A dominant diagonal approaches the ln n ceiling.
  Matrix s = Matrix::Zero(4, 4);
  s.diagonal().setConstant(200.0);
  EXPECT_NEAR(-cpc_loss_value(s), std::log(4.0), 1e-12);
}

TEST(CPC, ObjectiveBoundedByLogN) {
  auto rng = make_rng(3, "cpc");
  std::normal_distribution<double> n(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    const int size = 2 + t % 30;
    Matrix s(size, size);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
    EXPECT_LE(-cpc_loss_value(s), std::log(static_cast<double>(size)) + 1e-12);
  }
}

TEST(CPC, NonSquareIsStructural) {
  EXPECT_THROW(cpc_loss_value(Matrix::Zero(2, 3)), StructuralError);
}

TEST(Objectives, EmptyBatchIsUsageError) {
  for (auto k : {ObjectiveKind::JS, ObjectiveKind::DM1, ObjectiveKind::DM2, ObjectiveKind::PC,
                 ObjectiveKind::DRF, ObjectiveKind::NWJ, ObjectiveKind::DV}) {
    EXPECT_THROW(loss(k, {}, constant(2, 0)), UsageError) << to_string(k);
    EXPECT_THROW(loss(k, constant(2, 0), {}), UsageError) << to_string(k);
  }
}

TEST(Objectives, FiniteForLargeScores) {
  for (auto k : {ObjectiveKind::JS, ObjectiveKind::DM1, ObjectiveKind::DM2, ObjectiveKind::PC,
                 ObjectiveKind::DRF, ObjectiveKind::NWJ, ObjectiveKind::DV}) {
    for (double v : {100.0, -100.0}) {
      ad::Graph g;
      auto p = g.parameter("p", Matrix::Constant(3, 1, v));
      auto q = g.parameter("q", Matrix::Constant(3, 1, -v));
      auto root = pair_loss(ObjectiveSpec{k}, {p, {}}, {q, {}});
      EXPECT_TRUE(std::isfinite(g.evaluate(root))) << to_string(k);
      auto grads = g.backward(root);
      EXPECT_TRUE(grads.at("p").allFinite() && grads.at("q").allFinite()) << to_string(k);
    }
  }
}

TEST(Objectives, WeightedFormMatchesRepeatedSamples) {
  // Integer weights are equivalent to repeating samples.
  std::vector<double> p{0.2, -0.4}, pw{0.75, 0.25}, q{1.0, -1.0, 0.5}, qw{0.5, 0.25, 0.25};
  std::vector<double> prep{0.2, 0.2, 0.2, -0.4}, qrep{1.0, 1.0, -1.0, 0.5};
  for (auto k : {ObjectiveKind::JS, ObjectiveKind::DM1, ObjectiveKind::DM2, ObjectiveKind::PC,
                 ObjectiveKind::DRF, ObjectiveKind::NWJ, ObjectiveKind::DV})
    EXPECT_NEAR(loss_value(ObjectiveSpec{k}, p, pw, q, qw), loss(k, prep, qrep), 1e-12)
        << to_string(k);
}

TEST(ObjectiveSpec, Validation) {
  EXPECT_THROW((ObjectiveSpec{ObjectiveKind::DM2, 1.0, 0.0}.validate()), StructuralError);
  EXPECT_THROW((ObjectiveSpec{ObjectiveKind::PC, 1.0, 1.0, -1.0}.validate()), StructuralError);
  EXPECT_NO_THROW(ObjectiveSpec{}.validate());
}

TEST(ObjectiveKind, NamesRoundTrip) {
  for (auto k : {ObjectiveKind::JS, ObjectiveKind::DM1, ObjectiveKind::DM2, ObjectiveKind::PC,
                 ObjectiveKind::DRF, ObjectiveKind::NWJ, ObjectiveKind::DV, ObjectiveKind::CPC,
                 ObjectiveKind::SmileLearning})
    EXPECT_EQ(parse_objective(to_string(k)), k);
  EXPECT_THROW(parse_objective("mine"), StructuralError);
}

TEST(PairLoss, RejectsCPC) {
  ad::Graph g;
  auto p = g.constant(Matrix::Zero(2, 1));
  EXPECT_THROW(pair_loss(ObjectiveSpec{ObjectiveKind::CPC}, {p, {}}, {p, {}}), StructuralError);
}
